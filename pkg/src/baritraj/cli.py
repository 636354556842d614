"""Command-line driver for the full lifecycle.

Subcommands: simulate (generator spec -> cohort CSV), train (cohort CSV ->
model artifact + internal validation report), inspect (artifact -> textual
trees), validate (artifact + cohort -> metric report + Bland-Altman export),
report (metric report -> published-layout text tables), predict (profile flags
-> trajectory table), serve (artifact -> HTTP service).  Every subcommand is
reproducible under fixed seeds; set SOURCE_DATE_EPOCH to pin the artifact
timestamp for bit-identical reruns.  Flags win over config-file values.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def _add_config(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="optional JSON config file; flags take precedence")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _cfg(args, config: dict, name: str, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def cmd_simulate(args) -> int:
    from .cohort import cohort_to_csv
    from .synth import GeneratorSpec, generate_cohort, spec_from_dict

    config = _load_config(args.config)
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec_dict = json.load(fh)
    else:
        spec_dict = config.get("generator", {})
    if args.n is not None:
        spec_dict["n"] = args.n
    if args.seed is not None:
        spec_dict["seed"] = args.seed
    if "n" not in spec_dict:
        raise ValueError("simulate requires --n or a spec file providing n")
    spec = spec_from_dict(spec_dict) if spec_dict else GeneratorSpec(n=args.n, seed=args.seed or 0)
    cohort = generate_cohort(spec)
    cohort_to_csv(cohort, args.out)
    print(f"wrote {len(cohort)} patients to {args.out}")
    return 0


def cmd_train(args) -> int:
    from .cohort import load_cohort
    from .pipeline import PipelineConfig, run_training_pipeline
    from .trajectory import save_model
    from .tree import TreeParams

    config = _load_config(args.config)
    cohort, exclusions = load_cohort(args.cohort)
    timepoints = tuple(int(t) for t in (args.timepoints or config.get("timepoints") or (1, 3, 12, 24, 60)))
    pipeline_config = PipelineConfig(
        seed=int(_cfg(args, config, "seed", 0)),
        m_imputations=int(_cfg(args, config, "imputations", 10)),
        cv_folds=int(_cfg(args, config, "folds", 10)),
        split=float(_cfg(args, config, "split", 0.8)),
        timepoints=timepoints,
        tree_params=TreeParams(**config.get("tree_params", {})),
        threads=int(_cfg(args, config, "threads", os.cpu_count() or 1)),
    )
    result = run_training_pipeline(cohort, pipeline_config)
    save_model(result.model, args.out)

    lines = [exclusions.render(), ""]
    lines.append("screened out: " + (", ".join(f"{n} ({r})" for n, r in result.screen.dropped) or "none"))
    lines.append("selected features (selection frequency over all fits):")
    for name in sorted(result.selection.selected):
        lines.append(f"  {name}: {result.selection.frequency.get(name, 0.0):.2f}")
    lines.append("")
    lines.append(result.report.render())
    report_text = "\n".join(lines) + "\n"
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report_text)
    print(report_text, end="")
    print(f"model artifact written to {args.out}")
    return 0


def cmd_inspect(args) -> int:
    from .trajectory import load_model
    from .tree import render_tree

    model = load_model(args.model)
    print(f"model features: {', '.join(model.feature_names())}")
    for month in model.timepoints:
        q25, q75 = model.residual_quantiles[month]
        print(f"\n=== month {month} (residual quantiles {q25:.2f}, {q75:.2f}) ===")
        print(render_tree(model.trees[month]))
    return 0


def cmd_validate(args) -> int:
    from .cohort import load_cohort
    from .metrics import bland_altman, evaluate_cohort
    from .outcomes import compute_bmi, twl_to_weight
    from .trajectory import load_model
    from .tree import tree_predict

    model = load_model(args.model)
    cohort, _ = load_cohort(args.cohort)
    report = evaluate_cohort(
        model, cohort, seed=args.seed or 0, B=args.bootstrap or 10_000, label=args.label
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=1, sort_keys=True)
    if args.tsv:
        with open(args.tsv, "w", encoding="utf-8") as fh:
            fh.write(report.to_tsv())
    if args.bland_altman:
        rows = cohort.profile_rows()
        lines = ["month\tmean_bmi\tdifference"]
        for month in report.months:
            idx, _ = cohort.twl_at(month)
            if len(idx) < 2:
                continue
            pred, obs = [], []
            for i in idx:
                r = cohort.records[i]
                twl_hat = tree_predict(model.trees[month], rows[i])
                pred.append(compute_bmi(twl_to_weight(r.weight_kg, twl_hat), r.height_m))
                obs.append(compute_bmi(r.visit_at(month).weight_kg, r.height_m))
            ba = bland_altman(pred, obs)
            for mean_v, diff in zip(ba.means, ba.differences):
                lines.append(f"{month}\t{mean_v:.6g}\t{diff:.6g}")
        with open(args.bland_altman, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    print(f"metric report written to {args.out}")
    return 0


def cmd_report(args) -> int:
    from .metrics import MetricCell, MetricReport, render_table2, render_table3

    reports = []
    for path in args.reports:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        cells = {}
        for stratum, by_month in doc["strata"].items():
            cells[stratum] = {
                int(m): None if c is None else MetricCell(**{
                    k: tuple(v) if k.endswith("_ci") else v for k, v in c.items()
                })
                for m, c in by_month.items()
            }
        reports.append(MetricReport(doc["label"], cells, tuple(doc["months"])))
    print(render_table2(reports))
    for r in reports:
        print(render_table3(r))
    return 0


def cmd_predict(args) -> int:
    from .trajectory import PatientProfile, load_model, predict_profile

    model = load_model(args.model)
    profile = PatientProfile(
        age_years=args.age,
        weight_kg=args.weight,
        height_m=args.height,
        smoker=None if args.smoker == "unknown" else args.smoker == "yes",
        diabetes_status=args.diabetes,
        diabetes_duration_years=args.diabetes_years,
        operation=args.operation,
    )
    prediction = predict_profile(model, profile)
    view = prediction.view(args.units)
    print(f"units: {args.units}")
    print("month\tvalue\tlo\thi")
    for p in view.points:
        print(f"{p.month:g}\t{p.value:.2f}\t{p.lo:.2f}\t{p.hi:.2f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.model, cors_origins=args.cors_origin or None)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="baritraj", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic cohort CSV")
    p.add_argument("--spec", help="generator spec JSON file")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    _add_config(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a trajectory model from a cohort CSV")
    p.add_argument("--cohort", required=True)
    p.add_argument("--out", required=True, help="model artifact path")
    p.add_argument("--report", help="write the internal validation report here")
    p.add_argument("--seed", type=int)
    p.add_argument("--split", type=float)
    p.add_argument("--timepoints", type=int, nargs="+")
    p.add_argument("--imputations", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--threads", type=int, help="selection-grid worker pool size (default: available cores)")
    _add_config(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("inspect", help="print the per-timepoint trees")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("validate", help="score a model against an external cohort")
    p.add_argument("--model", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--out", required=True, help="metric report JSON path")
    p.add_argument("--tsv", help="also write the delimiter-separated table here")
    p.add_argument("--bland-altman", help="write (mean, difference) pairs here")
    p.add_argument("--label", default="cohort")
    p.add_argument("--seed", type=int)
    p.add_argument("--bootstrap", type=int, help="bootstrap replications (default 10000)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="render metric reports as comparison tables")
    p.add_argument("reports", nargs="+", help="metric report JSON files")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("predict", help="predict one profile's trajectory")
    p.add_argument("--model", required=True)
    p.add_argument("--age", type=float, required=True)
    p.add_argument("--weight", type=float, required=True)
    p.add_argument("--height", type=float, required=True)
    p.add_argument("--smoker", choices=["yes", "no", "unknown"], default="no")
    p.add_argument("--diabetes", choices=["none", "pre_t2d", "t2d"], default="none")
    p.add_argument("--diabetes-years", type=float, default=0.0)
    p.add_argument("--operation", choices=["RYGB", "SG", "AGB"], required=True)
    p.add_argument("--units", choices=["kg", "bmi", "twl", "ewl"], default="kg")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="serve the prediction API")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--cors-origin", action="append", help="allowed UI origin (repeatable)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # single-line machine-parsable failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
