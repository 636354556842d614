import numpy as np
import pytest

from baritraj.cohort import Cohort, PatientRecord, VisitRecord, PROFILE_FEATURES
from baritraj.metrics import MetricCell, evaluate_cohort, weighted_mean_row, MetricReport
from baritraj.outcomes import twl_to_weight
from baritraj.trajectory import train_trajectory_model


def constant_twl_cohort(n=120, twl_by_op=None, operations=("RYGB", "SG", "AGB")):
    """Every patient of an operation loses exactly the same fraction, so a
    tree that splits by operation predicts perfectly."""
    twl_by_op = twl_by_op or {"RYGB": 30.0, "SG": 24.0, "AGB": 15.0}
    rng = np.random.default_rng(0)
    records = []
    for i in range(n):
        op = operations[i % len(operations)]
        weight = float(rng.uniform(100, 200))
        visits = tuple(
            VisitRecord(m, twl_to_weight(weight, twl_by_op[op] * (0.4 + 0.1 * k)))
            for k, m in enumerate((1, 3, 12, 24, 60))
        )
        records.append(
            PatientRecord(
                id=f"c{i}",
                age_years=float(rng.uniform(20, 70)),
                weight_kg=weight,
                height_m=float(rng.uniform(1.5, 1.95)),
                sex="female" if i % 2 else "male",
                smoker=False,
                diabetes_status="none",
                diabetes_duration_years=0.0,
                operation=op,
                prior_bariatric_surgery=False,
                visits=visits,
            )
        )
    return Cohort(tuple(records))


class TestEvaluateCohort:
    def test_perfect_predictor_gives_zero_cells(self):
        cohort = constant_twl_cohort()
        model, _ = train_trajectory_model(cohort, PROFILE_FEATURES, seed=0)
        report = evaluate_cohort(model, cohort, seed=1, B=200)
        for by_month in report.cells.values():
            for cell in by_month.values():
                assert cell is not None
                assert cell.mad == 0.0 and cell.rmse == 0.0
                assert cell.bmi_diff_mean == pytest.approx(0.0, abs=1e-12)
                assert cell.mad_ci == (0.0, 0.0) and cell.rmse_ci == (0.0, 0.0)

    def test_missing_stratum_marked_unavailable(self):
        cohort = constant_twl_cohort(operations=("RYGB",))
        model, _ = train_trajectory_model(cohort, PROFILE_FEATURES, seed=0)
        report = evaluate_cohort(model, cohort, seed=1, B=200)
        assert all(c is None for c in report.cells["operation:SG"].values())
        assert all(c is not None for c in report.cells["operation:RYGB"].values())


def make_cell(n, value):
    ci = (value - 1.0, value + 1.0)
    return MetricCell(n, value, value, value, ci, value, ci, value, ci, value, ci)


class TestWeightedMeanRow:
    def test_weighted_formula(self):
        r1 = MetricReport("a", {"overall": {12: make_cell(100, 2.0), 24: None, 60: make_cell(100, 4.0)}})
        r2 = MetricReport("b", {"overall": {12: make_cell(300, 6.0), 24: make_cell(50, 1.0), 60: None}})
        row = weighted_mean_row([r1, r2])
        # month 12: (100*2 + 300*6) / 400 = 5.0, applied to every numeric field
        assert row[12].rmse == pytest.approx(5.0)
        assert row[12].bmi_diff_mean == pytest.approx(5.0)
        assert row[12].rmse_ci == (pytest.approx(4.0), pytest.approx(6.0))
        assert row[12].n == 400
        # months with a single contributing cohort pass through
        assert row[24].rmse == pytest.approx(1.0)
        assert row[60].rmse == pytest.approx(4.0)
