import numpy as np
import pytest

from baritraj.lasso import (
    LassoFit,
    cv_select_lambda,
    default_lambda_path,
    fit_lasso_path,
    kkt_max_violation,
    lasso_objective,
    pool_selected_features,
    soft_threshold,
    standardize_design,
)


def projected_gradient_lasso(X, y, lam, max_iter=300_000, move_tol=1e-13):
    """Slow independent oracle: minimize (1/2n)||y-Xb||^2 + lam*||b||_1 by
    splitting b = b+ - b- and projecting gradient steps onto the nonnegative
    orthant.  Stops when the iterate stops moving.  Shares no code with the
    coordinate-descent implementation."""
    n, p = X.shape
    L = np.linalg.norm(X, 2) ** 2 / n  # Lipschitz constant of the smooth part
    step = 1.0 / L
    bp = np.zeros(p)
    bm = np.zeros(p)
    for _ in range(max_iter):
        r = y - X @ (bp - bm)
        g = -(X.T @ r) / n
        bp_new = np.maximum(bp - step * (g + lam), 0.0)
        bm_new = np.maximum(bm - step * (-g + lam), 0.0)
        move = max(np.max(np.abs(bp_new - bp)), np.max(np.abs(bm_new - bm)))
        bp, bm = bp_new, bm_new
        if move < move_tol:
            break
    return bp - bm


def random_standardized_instance(rng, n, p, snr=1.0):
    X_raw = rng.normal(size=(n, p))
    beta = rng.normal(size=p) * (rng.random(p) < 0.6)
    y_raw = X_raw @ beta + rng.normal(scale=1.0 / max(snr, 1e-9), size=n)
    return standardize_design(X_raw, y_raw)


class TestSoftThreshold:
    def test_examples(self):
        assert soft_threshold(3, 1) == 2
        assert soft_threshold(-3, 1) == -2
        assert soft_threshold(0.5, 1) == 0

    def test_rejects_negative_gamma(self):
        with pytest.raises(ValueError):
            soft_threshold(1.0, -0.1)


class TestFitLassoPath:
    def test_orthonormal_closed_form(self):
        rng = np.random.default_rng(0)
        n, p = 120, 6
        M = rng.normal(size=(n, p))
        M -= M.mean(axis=0)
        q, _ = np.linalg.qr(M)
        X = q * np.sqrt(n)  # columns: mean ~0, population sd exactly 1, X'X/n = I
        X -= X.mean(axis=0)
        y = rng.normal(size=n)
        y -= y.mean()
        fit = fit_lasso_path(X, y)
        ols = X.T @ y / n
        for k, lam in enumerate(fit.lambda_path):
            expected = soft_threshold(ols, lam)
            assert np.max(np.abs(fit.coefficients[k] - expected)) < 1e-8

    def test_all_zero_at_lambda_max(self):
        rng = np.random.default_rng(1)
        X, y, _ = random_standardized_instance(rng, 50, 5)
        lam_max = float(np.max(np.abs(X.T @ y)) / len(y))
        fit = fit_lasso_path(X, y, np.array([lam_max * 2, lam_max]))
        assert np.all(fit.coefficients == 0.0)

    def test_kkt_along_path(self):
        rng = np.random.default_rng(2)
        X, y, _ = random_standardized_instance(rng, 40, 8)
        fit = fit_lasso_path(X, y)
        for k, lam in enumerate(fit.lambda_path):
            assert kkt_max_violation(X, y, fit.coefficients[k], lam) <= 1e-6

    def test_objective_matches_projected_gradient_oracle(self):
        rng = np.random.default_rng(3)
        X, y, _ = random_standardized_instance(rng, 40, 8)
        path = default_lambda_path(X, y)
        fit = fit_lasso_path(X, y, path)
        for k in (10, 50, 90):
            lam = path[k]
            oracle = projected_gradient_lasso(X, y, lam)
            obj_cd = lasso_objective(X, y, fit.coefficients[k], lam)
            obj_pg = lasso_objective(X, y, oracle, lam)
            assert abs(obj_cd - obj_pg) <= 1e-6 * max(1.0, abs(obj_pg))

    def test_warm_start_equals_cold_start(self):
        rng = np.random.default_rng(4)
        X, y, _ = random_standardized_instance(rng, 60, 7)
        path = default_lambda_path(X, y)
        fit = fit_lasso_path(X, y, path)
        for k in (25, 75):
            cold = fit_lasso_path(X, y, np.array([path[k]]))
            obj_warm = lasso_objective(X, y, fit.coefficients[k], path[k])
            obj_cold = lasso_objective(X, y, cold.coefficients[0], path[k])
            assert abs(obj_warm - obj_cold) <= 1e-8 * max(1.0, abs(obj_cold))

    def test_rejects_unstandardized_design(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(30, 3)) * 3.0
        y = rng.normal(size=30)
        with pytest.raises(ValueError, match="standardized"):
            fit_lasso_path(X, y)

    def test_rejects_non_finite(self):
        rng = np.random.default_rng(6)
        X, y, _ = random_standardized_instance(rng, 30, 3)
        X = X.copy()
        X[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            fit_lasso_path(X, y)

    def test_monotone_support_on_orthonormal_path(self):
        rng = np.random.default_rng(7)
        n, p = 100, 5
        M = rng.normal(size=(n, p))
        M -= M.mean(axis=0)
        q, _ = np.linalg.qr(M)
        X = q * np.sqrt(n)
        X -= X.mean(axis=0)
        y = X @ np.array([3.0, -2.0, 1.0, 0.5, 0.0]) + rng.normal(size=n) * 0.1
        y -= y.mean()
        fit = fit_lasso_path(X, y)
        sizes = (fit.coefficients != 0).sum(axis=1)
        assert np.all(np.diff(sizes) >= 0)


class TestCvSelectLambda:
    def test_noiseless_recovery(self):
        rng = np.random.default_rng(3)
        X_raw = rng.normal(size=(200, 5))
        y_raw = 2.0 * X_raw[:, 0]
        Xs, ys, std = standardize_design(X_raw, y_raw)
        fit = cv_select_lambda(Xs, ys, seed=11, standardization=std)
        assert "x0" in fit.selected_features
        coef = fit.coefficients_original_scale()[fit.selected_index()]
        assert abs(coef[0] - 2.0) < 0.1

    def test_pure_noise_mostly_empty(self):
        empty = 0
        runs = 50
        for s in range(runs):
            rng = np.random.default_rng(1000 + s)
            X_raw = rng.normal(size=(200, 20))
            y_raw = rng.normal(size=200)
            Xs, ys, std = standardize_design(X_raw, y_raw)
            fit = cv_select_lambda(Xs, ys, seed=s, standardization=std)
            empty += len(fit.selected_features) == 0
        assert empty >= 0.8 * runs

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(9)
        X, y, _ = random_standardized_instance(rng, 80, 6)
        f1 = cv_select_lambda(X, y, seed=5)
        f2 = cv_select_lambda(X, y, seed=5)
        assert f1.lambda_selected == f2.lambda_selected
        assert np.array_equal(f1.cv_mse, f2.cv_mse)

    def test_too_few_observations(self):
        rng = np.random.default_rng(10)
        X, y, _ = random_standardized_instance(rng, 12, 3)
        with pytest.raises(ValueError):
            cv_select_lambda(X, y, folds=15)


class TestPoolSelectedFeatures:
    def _fit_with(self, names, selected):
        p = len(names)
        return LassoFit(
            lambda_path=np.array([1.0, 0.5]),
            coefficients=np.zeros((2, p)),
            intercepts=np.zeros(2),
            feature_names=tuple(names),
            standardization=None,
            selected_features=frozenset(selected),
        )

    def test_union_and_frequencies(self):
        names = ("A", "B", "C")
        fits = [
            self._fit_with(names, {"A", "B"}),
            self._fit_with(names, {"A"}),
            self._fit_with(names, {"A", "C"}),
        ]
        pooled = pool_selected_features(fits)
        assert pooled.features == frozenset({"A", "B", "C"})
        assert pooled.frequency == {"A": 1.0, "B": pytest.approx(1 / 3), "C": pytest.approx(1 / 3)}

    def test_all_empty(self):
        names = ("A",)
        pooled = pool_selected_features([self._fit_with(names, set()) for _ in range(3)])
        assert pooled.features == frozenset()

    def test_single_fit_identity(self):
        pooled = pool_selected_features([self._fit_with(("A", "B"), {"B"})])
        assert pooled.features == frozenset({"B"})

    def test_union_contains_every_per_dataset_set(self):
        rng = np.random.default_rng(11)
        names = tuple("fghij")
        fits = []
        sets = []
        for _ in range(6):
            chosen = {n for n in names if rng.random() < 0.4}
            sets.append(chosen)
            fits.append(self._fit_with(names, chosen))
        pooled = pool_selected_features(fits)
        for s in sets:
            assert s <= pooled.features

    def test_mismatched_dictionaries_error(self):
        with pytest.raises(ValueError, match="mismatched"):
            pool_selected_features([self._fit_with(("A",), set()), self._fit_with(("B",), set())])


class TestObjectiveMonotonicity:
    def test_objective_nonincreasing_along_sweeps(self):
        from baritraj.lasso import _cd_kernel

        rng = np.random.default_rng(12)
        X, y, _ = random_standardized_instance(rng, 50, 6)
        n = len(y)
        lam = 0.05 * float(np.max(np.abs(X.T @ y)) / n)
        gram = np.ascontiguousarray(X.T @ X) / n
        xy = X.T @ y / n
        path = np.array([lam])
        objectives = [
            lasso_objective(X, y, _cd_kernel(gram, xy, path, sweeps, 0.0)[0], lam)
            for sweeps in range(1, 12)
        ]
        assert all(b <= a + 1e-12 for a, b in zip(objectives, objectives[1:]))

    def test_converged_beats_single_step(self):
        rng = np.random.default_rng(13)
        X, y, _ = random_standardized_instance(rng, 50, 6)
        lam = 0.05 * float(np.max(np.abs(X.T @ y)) / len(y))
        fit = fit_lasso_path(X, y, np.array([lam]))
        beta1 = np.zeros(6)
        g = X.T @ y / len(y)
        j = int(np.argmax(np.abs(g)))
        beta1[j] = soft_threshold(g[j], lam)
        assert lasso_objective(X, y, fit.coefficients[0], lam) <= lasso_objective(X, y, beta1, lam) + 1e-12
