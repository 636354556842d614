"""Evaluation statistics: prediction-error summaries, BCa bootstrap intervals,
Bland-Altman agreement, rank tests, an OLS comparator, and cohort-level
metric reports.

Naming note: "MAD" here is the median absolute prediction error
median(|observed_i - predicted_i|), not the classical median absolute
deviation from the median.  Normalized variants divide each patient's error by
that patient's observed value before aggregating.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats as sps

from .cohort import Cohort, profile_row
from .outcomes import compute_bmi, twl_to_weight
from .tree import tree_predict

EVAL_MONTHS = (12, 24, 60)


def _paired(predicted, observed):
    p = np.asarray(predicted, dtype=float)
    o = np.asarray(observed, dtype=float)
    if p.shape != o.shape or p.ndim != 1 or len(p) == 0:
        raise ValueError("predicted and observed must be equal-length non-empty vectors")
    return p, o


def mad(predicted, observed) -> float:
    """Median absolute prediction error (even-length medians average the middle pair)."""
    p, o = _paired(predicted, observed)
    return float(np.median(np.abs(o - p)))


def rmse(predicted, observed) -> float:
    p, o = _paired(predicted, observed)
    return float(np.sqrt(np.mean((o - p) ** 2)))


def normalized_metric(predicted, observed, kind: str) -> float:
    """MAD or RMSE of per-patient ratio errors (observed - predicted) / observed, in percent."""
    p, o = _paired(predicted, observed)
    if np.any(o <= 0):
        raise ValueError("normalized metrics require positive observed values")
    e = (o - p) / o
    if kind == "mad":
        return float(np.median(np.abs(e)) * 100.0)
    if kind == "rmse":
        return float(np.sqrt(np.mean(e**2)) * 100.0)
    raise ValueError(f"unknown kind {kind!r}")


@dataclass(frozen=True)
class BcaInterval:
    lo: float
    hi: float
    estimate: float
    degenerate: bool = False

    def as_tuple(self) -> tuple[float, float]:
        return (self.lo, self.hi)


def bca_interval(data, statistic, B: int = 10_000, level: float = 0.95, seed: int = 0) -> BcaInterval:
    """Bias-corrected and accelerated bootstrap confidence interval.

    z0 comes from the fraction of bootstrap replicates below the point
    estimate, the acceleration from jackknife skewness, and the endpoints are
    linear-interpolated quantiles of the replicate distribution at the
    adjusted levels.  Deterministic under ``seed``.  A degenerate bootstrap
    distribution (all replicates equal) collapses to the point interval.
    """
    data = np.asarray(data, dtype=float)
    n = len(data)
    if n < 2:
        raise ValueError("bca_interval needs at least 2 observations")
    if B < 100:
        raise ValueError("bca_interval needs at least 100 replications")
    estimate = float(statistic(data))

    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(B, n))
    boot = np.array([statistic(data[row]) for row in idx], dtype=float)

    if np.all(boot == boot[0]):
        return BcaInterval(estimate, estimate, estimate, degenerate=True)

    below = int(np.count_nonzero(boot < estimate))
    below = min(max(below, 0.5), B - 0.5)  # keep z0 finite at the boundary
    z0 = sps.norm.ppf(below / B)

    jack = np.array([statistic(np.delete(data, i)) for i in range(n)], dtype=float)
    d = jack.mean() - jack
    denom = np.sum(d**2) ** 1.5
    a = float(np.sum(d**3) / (6.0 * denom)) if denom > 0 else 0.0

    alpha = 1.0 - level
    out = []
    for z_tail in (sps.norm.ppf(alpha / 2), sps.norm.ppf(1 - alpha / 2)):
        adj = z0 + (z0 + z_tail) / (1.0 - a * (z0 + z_tail))
        out.append(float(np.quantile(boot, sps.norm.cdf(adj))))
    return BcaInterval(out[0], out[1], estimate)


@dataclass(frozen=True)
class BlandAltman:
    bias: float
    sd: float
    loa_lo: float
    loa_hi: float
    means: np.ndarray = field(repr=False)
    differences: np.ndarray = field(repr=False)


def bland_altman(predicted, observed) -> BlandAltman:
    """Agreement analysis of predicted vs observed: bias and 1.96-sd limits."""
    p, o = _paired(predicted, observed)
    if len(p) < 2:
        raise ValueError("bland_altman needs at least 2 pairs to estimate the sd")
    d = p - o
    bias = float(d.mean())
    sd = float(d.std(ddof=1))
    return BlandAltman(bias, sd, bias - 1.96 * sd, bias + 1.96 * sd, (p + o) / 2.0, d)


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0  # 1-based midrank
        i = j + 1
    return ranks


def _exact_u_distribution(double_ranks: list[int], n_a: int) -> dict[int, Fraction]:
    """Permutation distribution of the doubled rank sum of a size-n_a subset.

    Subset-sum dynamic program over the combined midrank multiset (doubled so
    sums stay integral), exact in rational arithmetic.
    """
    n = len(double_ranks)
    # table[k][s] = number of k-subsets of the first items with doubled rank sum s
    table: list[dict[int, int]] = [dict() for _ in range(n_a + 1)]
    table[0][0] = 1
    for r in double_ranks:
        for k in range(min(n_a, n), 0, -1):
            prev = table[k - 1]
            if not prev:
                continue
            cur = table[k]
            for s, c in prev.items():
                cur[s + r] = cur.get(s + r, 0) + c
    total = sum(table[n_a].values())
    return {s: Fraction(c, total) for s, c in table[n_a].items()}


EXACT_U_LIMIT = 400  # exact enumeration whenever n_a * n_b is at most this


@dataclass(frozen=True)
class RankTestResult:
    statistic: float
    p_value: float
    method: str


def mann_whitney_u(group_a, group_b) -> RankTestResult:
    """Mann-Whitney U with midrank ties; U counts pairs where a exceeds b.

    The two-sided p-value is exact (permutation distribution, distance from
    the null mean n_a*n_b/2) when n_a*n_b <= 400, else a tie-corrected normal
    approximation without continuity correction.
    """
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("mann_whitney_u requires two non-empty groups")
    n_a, n_b = len(a), len(b)
    combined = np.concatenate([a, b])
    ranks = _midranks(combined)
    r_a = float(ranks[:n_a].sum())
    u = r_a - n_a * (n_a + 1) / 2.0

    if n_a * n_b <= EXACT_U_LIMIT:
        double_ranks = [int(round(2 * r)) for r in ranks]
        dist = _exact_u_distribution(double_ranks, n_a)
        # doubled U = doubled rank sum - n_a (n_a + 1); null mean doubled U = n_a n_b
        obs2 = int(round(2 * r_a)) - n_a * (n_a + 1)
        center = n_a * n_b
        obs_dist = abs(obs2 - center)
        p = sum(pr for s, pr in dist.items() if abs(s - n_a * (n_a + 1) - center) >= obs_dist)
        return RankTestResult(u, float(p), "exact")

    n = n_a + n_b
    _, counts = np.unique(combined, return_counts=True)
    tie_term = float(np.sum(counts**3 - counts)) / (n * (n - 1))
    var_u = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    if var_u <= 0:
        return RankTestResult(u, 1.0, "normal")
    z = (u - n_a * n_b / 2.0) / np.sqrt(var_u)
    return RankTestResult(u, float(2.0 * sps.norm.sf(abs(z))), "normal")


def kruskal_wallis(groups) -> RankTestResult:
    """Kruskal-Wallis H with tie correction and a chi-squared p (k-1 df)."""
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(len(g) == 0 for g in groups):
        raise ValueError("kruskal_wallis requires at least 2 non-empty groups")
    combined = np.concatenate(groups)
    n = len(combined)
    ranks = _midranks(combined)
    h = 0.0
    start = 0
    for g in groups:
        r = ranks[start : start + len(g)]
        h += r.sum() ** 2 / len(g)
        start += len(g)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    _, counts = np.unique(combined, return_counts=True)
    correction = 1.0 - float(np.sum(counts**3 - counts)) / (n**3 - n)
    if correction == 0.0:
        return RankTestResult(0.0, 1.0, "chi2")  # every value tied
    h /= correction
    p = float(sps.chi2.sf(h, df=len(groups) - 1))
    return RankTestResult(float(h), p, "chi2")


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    residuals: np.ndarray = field(repr=False)

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coefficients


def ols_baseline(X, y, column_names: tuple[str, ...] | None = None) -> OlsFit:
    """Least squares via QR with column pivoting; rank deficiency names columns."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n <= p:
        raise ValueError("ols_baseline requires more observations than columns")
    from scipy.linalg import qr

    q, r, piv = qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(n, p) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    if rank < p:
        names = column_names or tuple(f"x{j}" for j in range(p))
        bad = sorted(names[j] for j in piv[rank:])
        raise ValueError(f"design is rank deficient; collinear columns: {', '.join(bad)}")
    beta_piv = np.linalg.solve(r, q.T @ y)
    beta = np.empty(p)
    beta[piv] = beta_piv
    return OlsFit(beta, y - X @ beta)


@dataclass(frozen=True)
class MetricCell:
    """One (stratum, month) cell of a Table-2/3 style report."""

    n: int
    bmi_diff_mean: float
    bmi_diff_sd: float
    mad: float
    mad_ci: tuple[float, float]
    rmse: float
    rmse_ci: tuple[float, float]
    normalized_mad: float
    normalized_mad_ci: tuple[float, float]
    normalized_rmse: float
    normalized_rmse_ci: tuple[float, float]


@dataclass
class MetricReport:
    """Per-stratum, per-month prediction metrics for one evaluation cohort."""

    label: str
    cells: dict[str, dict[int, MetricCell | None]]
    months: tuple[int, ...] = EVAL_MONTHS

    def to_json_dict(self) -> dict:
        out = {"label": self.label, "months": list(self.months), "strata": {}}
        for stratum, by_month in self.cells.items():
            out["strata"][stratum] = {
                str(m): None if c is None else c.__dict__ for m, c in by_month.items()
            }
        return out

    def to_tsv(self) -> str:
        cols = [
            "stratum", "month", "n", "bmi_diff_mean", "bmi_diff_sd",
            "mad", "mad_lo", "mad_hi", "rmse", "rmse_lo", "rmse_hi",
            "normalized_mad", "normalized_mad_lo", "normalized_mad_hi",
            "normalized_rmse", "normalized_rmse_lo", "normalized_rmse_hi",
        ]
        lines = ["\t".join(cols)]
        for stratum in self.cells:
            for m in self.months:
                c = self.cells[stratum].get(m)
                if c is None:
                    lines.append("\t".join([stratum, str(m)] + ["NA"] * (len(cols) - 2)))
                    continue
                vals = [
                    c.n, c.bmi_diff_mean, c.bmi_diff_sd,
                    c.mad, *c.mad_ci, c.rmse, *c.rmse_ci,
                    c.normalized_mad, *c.normalized_mad_ci,
                    c.normalized_rmse, *c.normalized_rmse_ci,
                ]
                lines.append("\t".join([stratum, str(m)] + [f"{v:.6g}" for v in vals]))
        return "\n".join(lines) + "\n"


def _evaluate_errors(pred_bmi, obs_bmi, seed, B) -> MetricCell:
    pred_bmi = np.asarray(pred_bmi, dtype=float)
    obs_bmi = np.asarray(obs_bmi, dtype=float)
    diffs = pred_bmi - obs_bmi  # negative means predicted below observed
    errors = obs_bmi - pred_bmi
    ratios = errors / obs_bmi
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = root.spawn(4)

    def med_abs(v):
        return float(np.median(np.abs(v)))

    def root_mean_sq(v):
        return float(np.sqrt(np.mean(v**2)))

    ci_mad = bca_interval(errors, med_abs, B=B, seed=seeds[0])
    ci_rmse = bca_interval(errors, root_mean_sq, B=B, seed=seeds[1])
    ci_nmad = bca_interval(ratios, lambda v: med_abs(v) * 100.0, B=B, seed=seeds[2])
    ci_nrmse = bca_interval(ratios, lambda v: root_mean_sq(v) * 100.0, B=B, seed=seeds[3])
    sd = float(diffs.std(ddof=1)) if len(diffs) > 1 else 0.0
    return MetricCell(
        n=len(diffs),
        bmi_diff_mean=float(diffs.mean()),
        bmi_diff_sd=sd,
        mad=ci_mad.estimate,
        mad_ci=ci_mad.as_tuple(),
        rmse=ci_rmse.estimate,
        rmse_ci=ci_rmse.as_tuple(),
        normalized_mad=ci_nmad.estimate,
        normalized_mad_ci=ci_nmad.as_tuple(),
        normalized_rmse=ci_nrmse.estimate,
        normalized_rmse_ci=ci_nrmse.as_tuple(),
    )


def evaluate_cohort(
    model,
    cohort: Cohort,
    seed: int = 0,
    B: int = 10_000,
    months: tuple[int, ...] = EVAL_MONTHS,
    label: str = "cohort",
) -> MetricReport:
    """Score a trajectory model against observed outcomes, Table-2/3 style.

    Builds BMI-scale cells (difference mean/sd, MAD and RMSE with BCa CIs,
    normalized variants) per month for the whole cohort and per operation.
    Strata with no observed rows at a month are marked unavailable (None).
    """
    months = tuple(m for m in months if m in model.trees)
    strata: dict[str, np.ndarray] = {"overall": np.arange(len(cohort))}
    ops = np.array([r.operation for r in cohort.records])
    for op in ("RYGB", "SG", "AGB"):
        strata[f"operation:{op}"] = np.flatnonzero(ops == op)

    rows = cohort.profile_rows()
    cells: dict[str, dict[int, MetricCell | None]] = {s: {} for s in strata}
    seed_root = np.random.SeedSequence(seed)
    stream = {
        (s, m): child
        for (s, m), child in zip(
            [(s, m) for s in sorted(strata) for m in months],
            seed_root.spawn(len(strata) * len(months)),
        )
    }
    for month in months:
        idx_obs, _ = cohort.twl_at(month)
        obs_set = set(idx_obs.tolist())
        for name, members in strata.items():
            use = [i for i in members.tolist() if i in obs_set]
            if not use:
                cells[name][month] = None
                continue
            pred_bmi, obs_bmi = [], []
            for i in use:
                r = cohort.records[i]
                twl_hat = tree_predict(model.trees[month], rows[i])
                pred_bmi.append(compute_bmi(twl_to_weight(r.weight_kg, twl_hat), r.height_m))
                obs_bmi.append(compute_bmi(r.visit_at(month).weight_kg, r.height_m))
            cells[name][month] = _evaluate_errors(pred_bmi, obs_bmi, stream[(name, month)], B)
    return MetricReport(label, cells, months)


def weighted_mean_row(reports: list[MetricReport], months: tuple[int, ...] = EVAL_MONTHS) -> dict[int, MetricCell | None]:
    """Cohort-size-weighted mean of every numeric field of the overall rows."""
    out: dict[int, MetricCell | None] = {}
    for m in months:
        cells = [r.cells["overall"].get(m) for r in reports]
        cells = [c for c in cells if c is not None]
        if not cells:
            out[m] = None
            continue
        w = np.array([c.n for c in cells], dtype=float)
        w /= w.sum()

        def avg(get):
            return float(np.sum(w * np.array([get(c) for c in cells])))

        out[m] = MetricCell(
            n=int(sum(c.n for c in cells)),
            bmi_diff_mean=avg(lambda c: c.bmi_diff_mean),
            bmi_diff_sd=avg(lambda c: c.bmi_diff_sd),
            mad=avg(lambda c: c.mad),
            mad_ci=(avg(lambda c: c.mad_ci[0]), avg(lambda c: c.mad_ci[1])),
            rmse=avg(lambda c: c.rmse),
            rmse_ci=(avg(lambda c: c.rmse_ci[0]), avg(lambda c: c.rmse_ci[1])),
            normalized_mad=avg(lambda c: c.normalized_mad),
            normalized_mad_ci=(
                avg(lambda c: c.normalized_mad_ci[0]),
                avg(lambda c: c.normalized_mad_ci[1]),
            ),
            normalized_rmse=avg(lambda c: c.normalized_rmse),
            normalized_rmse_ci=(
                avg(lambda c: c.normalized_rmse_ci[0]),
                avg(lambda c: c.normalized_rmse_ci[1]),
            ),
        )
    return out


TABLE_COLUMNS = ("BMI difference in kg/m2 (SD)", "RMSE in kg/m2 (95% CI)", "Normalised RMSE in % of BMI (95% CI)")


def _fmt_cell(cell: MetricCell | None, column: str) -> str:
    if cell is None:
        return "NA"
    if column.startswith("BMI difference"):
        return f"{cell.bmi_diff_mean:.1f} ({cell.bmi_diff_sd:.1f})"
    if column.startswith("RMSE"):
        return f"{cell.rmse:.1f} ({cell.rmse_ci[0]:.1f}-{cell.rmse_ci[1]:.1f})"
    return f"{cell.normalized_rmse:.1f} ({cell.normalized_rmse_ci[0]:.1f}-{cell.normalized_rmse_ci[1]:.1f})"


def render_comparison_table(
    rows: list[tuple[str, dict[int, MetricCell | None]]],
    months: tuple[int, ...] = EVAL_MONTHS,
    title: str = "Comparison of predicted outcomes",
) -> str:
    """Render rows of cells in the published comparison-table layout."""
    header = ["cohort"]
    for column in TABLE_COLUMNS:
        for m in months:
            header.append(f"{column} | Month {m}")
    lines = [title, "\t".join(header)]
    for name, by_month in rows:
        line = [name]
        for column in TABLE_COLUMNS:
            for m in months:
                line.append(_fmt_cell(by_month.get(m), column))
        lines.append("\t".join(line))
    return "\n".join(lines) + "\n"


def render_table2(reports: list[MetricReport], months: tuple[int, ...] = EVAL_MONTHS) -> str:
    rows = [(r.label, r.cells["overall"]) for r in reports]
    if len(reports) > 1:
        rows.append(("Mean weighted by cohort sizes", weighted_mean_row(reports, months)))
    return render_comparison_table(rows, months, "Comparison of predicted outcomes in validation cohorts")


def render_table3(report: MetricReport, months: tuple[int, ...] = EVAL_MONTHS) -> str:
    labels = {"operation:RYGB": "Roux-en-Y gastric bypass", "operation:SG": "Sleeve gastrectomy", "operation:AGB": "Adjusted gastric banding"}
    rows = [(labels[k], report.cells[k]) for k in ("operation:RYGB", "operation:SG", "operation:AGB") if k in report.cells]
    return render_comparison_table(rows, months, "Comparison of predicted outcomes by operation")
