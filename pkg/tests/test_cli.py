import json
import os
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "baritraj.cli"]


def run_cli(args, env_extra=None, cwd=None):
    env = dict(os.environ)
    env["SOURCE_DATE_EPOCH"] = "946684800"  # pin artifact timestamps
    if env_extra:
        env.update(env_extra)
    return subprocess.run(CLI + args, capture_output=True, text=True, env=env, cwd=cwd)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def cohort_csv(workdir):
    path = workdir / "cohort.csv"
    r = run_cli(["simulate", "--n", "1200", "--seed", "3", "--out", str(path)])
    assert r.returncode == 0, r.stderr
    return path


@pytest.fixture(scope="module")
def model_path(workdir, cohort_csv):
    path = workdir / "model.json"
    r = run_cli([
        "train", "--cohort", str(cohort_csv), "--out", str(path),
        "--seed", "7", "--split", "0.8", "--imputations", "3",
        "--report", str(workdir / "train_report.txt"),
    ])
    assert r.returncode == 0, r.stderr
    return path


class TestSimulate:
    def test_writes_cohort_csv(self, cohort_csv):
        header = cohort_csv.read_text().splitlines()[0]
        assert header.startswith("id,age,weight_kg,height_m,sex,smoker,diabetes")

    def test_deterministic(self, workdir):
        a, b = workdir / "a.csv", workdir / "b.csv"
        assert run_cli(["simulate", "--n", "100", "--seed", "5", "--out", str(a)]).returncode == 0
        assert run_cli(["simulate", "--n", "100", "--seed", "5", "--out", str(b)]).returncode == 0
        assert a.read_bytes() == b.read_bytes()

    def test_spec_file(self, workdir):
        spec = workdir / "spec.json"
        spec.write_text(json.dumps({"n": 40, "seed": 1, "noise_sd": 0.0, "censoring": {}}))
        out = workdir / "spec_cohort.csv"
        r = run_cli(["simulate", "--spec", str(spec), "--out", str(out)])
        assert r.returncode == 0, r.stderr
        assert len(out.read_text().splitlines()) == 41


class TestTrain:
    def test_rerun_bit_identical(self, workdir, cohort_csv, model_path):
        again = workdir / "model2.json"
        r = run_cli([
            "train", "--cohort", str(cohort_csv), "--out", str(again),
            "--seed", "7", "--split", "0.8", "--imputations", "3",
        ])
        assert r.returncode == 0, r.stderr
        assert again.read_bytes() == model_path.read_bytes()

    def test_report_written(self, workdir, model_path):
        text = (workdir / "train_report.txt").read_text()
        assert "internal validation" in text
        assert "selected features" in text


class TestInspect:
    def test_lists_operation_root(self, model_path):
        r = run_cli(["inspect", "--model", str(model_path)])
        assert r.returncode == 0, r.stderr
        assert "operation" in r.stdout
        first_tree_line = next(line for line in r.stdout.splitlines() if line.startswith("[root]"))
        assert "operation in" in first_tree_line

    def test_shows_all_timepoints(self, model_path):
        r = run_cli(["inspect", "--model", str(model_path)])
        for month in (1, 3, 12, 24, 60):
            assert f"=== month {month}" in r.stdout


@pytest.fixture(scope="module")
def report_path(workdir, cohort_csv, model_path):
    out = workdir / "metrics.json"
    r = run_cli([
        "validate", "--model", str(model_path), "--cohort", str(cohort_csv),
        "--out", str(out), "--tsv", str(workdir / "metrics.tsv"),
        "--bland-altman", str(workdir / "ba.tsv"),
        "--label", "synthetic", "--seed", "1", "--bootstrap", "400",
    ])
    assert r.returncode == 0, r.stderr
    return out


class TestValidateAndReport:
    def test_report_structure(self, report_path):
        doc = json.loads(report_path.read_text())
        assert doc["label"] == "synthetic"
        assert set(doc["strata"]) == {"overall", "operation:RYGB", "operation:SG", "operation:AGB"}
        cell = doc["strata"]["overall"]["60"]
        assert set(cell) >= {"n", "bmi_diff_mean", "rmse", "rmse_ci", "normalized_rmse"}

    def test_bland_altman_export(self, workdir, report_path):
        lines = (workdir / "ba.tsv").read_text().splitlines()
        assert lines[0] == "month\tmean_bmi\tdifference"
        assert len(lines) > 10

    def test_report_renders_table_layout(self, report_path):
        r = run_cli(["report", str(report_path)])
        assert r.returncode == 0, r.stderr
        assert "BMI difference in kg/m2 (SD) | Month 12" in r.stdout
        assert "RMSE in kg/m2 (95% CI) | Month 60" in r.stdout
        assert "Normalised RMSE in % of BMI (95% CI) | Month 24" in r.stdout
        assert "Roux-en-Y gastric bypass" in r.stdout

    def test_tsv_export(self, workdir, report_path):
        text = (workdir / "metrics.tsv").read_text()
        assert text.startswith("stratum\tmonth\tn")


class TestPredictCommand:
    def test_trajectory_table(self, model_path):
        r = run_cli([
            "predict", "--model", str(model_path), "--age", "30", "--weight", "150",
            "--height", "1.80", "--operation", "RYGB", "--units", "kg",
        ])
        assert r.returncode == 0, r.stderr
        lines = r.stdout.splitlines()
        assert lines[1] == "month\tvalue\tlo\thi"
        first = lines[2].split("\t")
        assert first[0] == "0" and float(first[1]) == 150.0

    def test_invalid_profile_fails_cleanly(self, model_path):
        r = run_cli([
            "predict", "--model", str(model_path), "--age", "17", "--weight", "150",
            "--height", "1.80", "--operation", "RYGB",
        ])
        assert r.returncode == 1
        assert r.stderr.startswith("error: ")
        assert "age" in r.stderr


class TestErrors:
    def test_unknown_subcommand_usage(self):
        r = run_cli(["frobnicate"])
        assert r.returncode == 2
        assert "usage" in r.stderr.lower()

    def test_missing_model_single_line_error(self):
        r = run_cli(["inspect", "--model", "/nonexistent/model.json"])
        assert r.returncode == 1
        assert r.stderr.startswith("error: ")
        assert len(r.stderr.strip().splitlines()) == 1
