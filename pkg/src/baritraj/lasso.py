"""L1-penalized linear regression by cyclic coordinate descent over a lambda path.

The objective solved at each path point is

    (1 / 2n) * ||y - X b||^2 + lambda * ||b||_1

for a column-standardized design (mean 0, population sd 1) and centered
response.  Updates use precomputed Gram products, so one coordinate sweep
costs O(p^2) regardless of n; fits are warm-started along a descending
lambda grid.  The solution is characterized by the KKT conditions
|X_j' r| / n <= lambda for zero coefficients and X_j' r / n = lambda *
sign(b_j) for active ones, which the tests assert directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

MAX_SWEEPS = 10_000
COEF_TOL = 1e-7
PATH_LENGTH = 100
PATH_RATIO = 1e-3
SD_GUARD = (0.99, 1.01)


def soft_threshold(z, gamma):
    """sign(z) * max(|z| - gamma, 0); gamma must be non-negative."""
    z = np.asarray(z, dtype=float)
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("soft_threshold requires gamma >= 0")
    out = np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class Standardization:
    """Per-column means/sds of the raw design plus the raw response mean."""

    means: np.ndarray
    sds: np.ndarray
    y_mean: float = 0.0


def standardize_design(X_raw: np.ndarray, y_raw: np.ndarray):
    """Center/scale columns to population sd 1 and center y.

    Returns (X, y, Standardization).  Constant columns are rejected; drop them
    before calling (the screening stage removes single-level features).
    """
    X_raw = np.asarray(X_raw, dtype=float)
    y_raw = np.asarray(y_raw, dtype=float)
    means = X_raw.mean(axis=0)
    sds = X_raw.std(axis=0)
    if np.any(sds == 0):
        bad = [int(j) for j in np.flatnonzero(sds == 0)]
        raise ValueError(f"constant design columns cannot be standardized: {bad}")
    y_mean = float(y_raw.mean())
    return (X_raw - means) / sds, y_raw - y_mean, Standardization(means, sds, y_mean)


@dataclass
class LassoFit:
    """A fitted regularization path, optionally annotated by cross-validation."""

    lambda_path: np.ndarray
    coefficients: np.ndarray          # (L, p), standardized scale
    intercepts: np.ndarray            # (L,), original scale
    feature_names: tuple[str, ...]
    standardization: Standardization
    cv_mse: np.ndarray | None = None
    cv_se: np.ndarray | None = None
    lambda_selected: float | None = None
    selected_features: frozenset[str] = field(default_factory=frozenset)

    def coefficients_original_scale(self) -> np.ndarray:
        return self.coefficients / self.standardization.sds

    def selected_index(self) -> int:
        if self.lambda_selected is None:
            raise ValueError("no lambda has been selected for this fit")
        return int(np.argmin(np.abs(self.lambda_path - self.lambda_selected)))


def default_lambda_path(X: np.ndarray, y: np.ndarray, length: int = PATH_LENGTH) -> np.ndarray:
    """Log-spaced descending grid from lambda_max = max_j |X_j'y|/n."""
    n = len(y)
    lam_max = float(np.max(np.abs(X.T @ y)) / n)
    if lam_max <= 0:
        lam_max = 1.0  # response orthogonal to every column; any grid gives the null model
    return np.geomspace(lam_max, PATH_RATIO * lam_max, length)


@njit(cache=True)
def _cd_kernel(gram, xy, lambda_path, max_sweeps, tol):  # pragma: no cover - exercised via _cd_path
    p = xy.shape[0]
    L = lambda_path.shape[0]
    coefs = np.zeros((L, p))
    beta = np.zeros(p)
    gram_beta = np.zeros(p)  # running (X'X/n) @ beta
    for k in range(L):
        lam = lambda_path[k]
        for _ in range(max_sweeps):
            max_delta = 0.0
            for j in range(p):
                old = beta[j]
                gjj = gram[j, j]
                rho = xy[j] - gram_beta[j] + gjj * old
                excess = abs(rho) - lam
                new = 0.0
                if excess > 0.0:
                    new = excess / gjj if rho > 0.0 else -excess / gjj
                if new != old:
                    delta = new - old
                    for t in range(p):
                        gram_beta[t] += gram[t, j] * delta
                    beta[j] = new
                    if abs(delta) > max_delta:
                        max_delta = abs(delta)
            if max_delta < tol:
                break
            for _ in range(max_sweeps):  # iterate the active set before the next full sweep
                max_delta = 0.0
                for j in range(p):
                    old = beta[j]
                    if old == 0.0:
                        continue
                    gjj = gram[j, j]
                    rho = xy[j] - gram_beta[j] + gjj * old
                    excess = abs(rho) - lam
                    new = 0.0
                    if excess > 0.0:
                        new = excess / gjj if rho > 0.0 else -excess / gjj
                    if new != old:
                        delta = new - old
                        for t in range(p):
                            gram_beta[t] += gram[t, j] * delta
                        beta[j] = new
                        if abs(delta) > max_delta:
                            max_delta = abs(delta)
                if max_delta < tol:
                    break
        coefs[k] = beta
    return coefs


def _cd_path(X: np.ndarray, y: np.ndarray, lambda_path: np.ndarray) -> np.ndarray:
    """Coordinate descent along the path with warm starts and an active-set loop."""
    n = len(y)
    gram = np.ascontiguousarray(X.T @ X) / n
    xy = (X.T @ y) / n
    return _cd_kernel(gram, xy, np.ascontiguousarray(lambda_path, dtype=float), MAX_SWEEPS, COEF_TOL)


def fit_lasso_path(
    X: np.ndarray,
    y: np.ndarray,
    lambda_path: np.ndarray | None = None,
    feature_names: tuple[str, ...] | None = None,
    standardization: Standardization | None = None,
) -> LassoFit:
    """Fit the full path on a standardized design and centered response.

    ``standardization`` carries the raw-scale metadata when the caller
    standardized a raw design; by default the design is assumed native
    (means 0, sds 1) and intercepts are the plain response mean.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("design and response must be finite")
    n, p = X.shape
    sds = X.std(axis=0)
    lo, hi = SD_GUARD
    if np.any((sds < lo) | (sds > hi)):
        bad = [int(j) for j in np.flatnonzero((sds < lo) | (sds > hi))]
        raise ValueError(f"columns not standardized to unit sd: {bad}")

    if lambda_path is None:
        lambda_path = default_lambda_path(X, y)
    lambda_path = np.asarray(lambda_path, dtype=float)
    if np.any(np.diff(lambda_path) >= 0):
        raise ValueError("lambda_path must be strictly decreasing")

    coefs = _cd_path(X, y, lambda_path)
    std = standardization or Standardization(np.zeros(p), np.ones(p), 0.0)
    orig = coefs / std.sds
    intercepts = std.y_mean - orig @ std.means
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(p))
    return LassoFit(lambda_path, coefs, intercepts, names, std)


def lasso_objective(X, y, beta, lam) -> float:
    n = len(y)
    r = y - X @ beta
    return float(r @ r / (2 * n) + lam * np.sum(np.abs(beta)))


def kkt_max_violation(X, y, beta, lam) -> float:
    """Largest KKT residual; a correct solution is within solver tolerance of 0."""
    n = len(y)
    g = X.T @ (y - X @ beta) / n
    active = beta != 0
    viol = np.maximum(np.abs(g[~active]) - lam, 0.0)
    viol_active = np.abs(g[active] - lam * np.sign(beta[active]))
    parts = [v for v in (viol, viol_active) if v.size]
    return float(max(np.max(v) for v in parts)) if parts else 0.0


def cv_select_lambda(
    X: np.ndarray,
    y: np.ndarray,
    folds: int = 10,
    seed: int = 0,
    lambda_path: np.ndarray | None = None,
    feature_names: tuple[str, ...] | None = None,
    standardization: Standardization | None = None,
    rule: str = "1se",
) -> LassoFit:
    """K-fold CV over a shared lambda path.

    ``rule="min"`` selects the lambda minimizing mean validation MSE;
    ``rule="1se"`` (default) selects the largest lambda whose mean MSE is
    within one standard error of that minimum, the usual guard against the
    minimum's tendency to drag noise features into the support.  Folds are a
    seeded permutation split; each fold's training block is re-standardized
    before fitting so fold fits see exactly unit-sd columns.  Ties in the CV
    curve resolve toward the largest lambda.  Returns the full-data path fit
    annotated with the CV curve and the selected support.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < folds:
        raise ValueError(f"need at least {folds} observations for {folds}-fold CV")

    if lambda_path is None:
        lambda_path = default_lambda_path(X, y)
    fit = fit_lasso_path(X, y, lambda_path, feature_names, standardization)

    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    fold_ids = np.empty(n, dtype=int)
    for f, chunk in enumerate(np.array_split(order, folds)):
        if len(chunk) < 2:
            raise ValueError("every CV fold needs at least 2 observations")
        fold_ids[chunk] = f

    sq_err = np.zeros((len(lambda_path), n))
    for f in range(folds):
        val = fold_ids == f
        Xtr_raw, ytr_raw = X[~val], y[~val]
        Xs, ys, std = standardize_design(Xtr_raw, ytr_raw)
        coefs = _cd_path(Xs, ys, np.asarray(lambda_path, dtype=float))
        orig = coefs / std.sds
        preds = (X[val] - std.means) @ orig.T + std.y_mean
        sq_err[:, val] = ((preds - y[val, None]) ** 2).T

    cv_mse = sq_err.mean(axis=1)
    fold_mse = np.stack([sq_err[:, fold_ids == f].mean(axis=1) for f in range(folds)], axis=1)
    cv_se = fold_mse.std(axis=1, ddof=1) / np.sqrt(folds)
    minimum = int(np.argmin(cv_mse))  # first minimum = largest lambda on ties
    if rule == "min":
        best = minimum
    elif rule == "1se":
        cutoff = cv_mse[minimum] + cv_se[minimum]
        best = int(np.flatnonzero(cv_mse <= cutoff)[0])
    else:
        raise ValueError(f"unknown selection rule {rule!r}")

    names = fit.feature_names
    support = frozenset(names[j] for j in np.flatnonzero(fit.coefficients[best]))
    return replace(
        fit,
        cv_mse=cv_mse,
        cv_se=cv_se,
        lambda_selected=float(lambda_path[best]),
        selected_features=support,
    )


@dataclass
class PooledSelection:
    """Union of supports across imputed-dataset fits with selection frequencies."""

    features: frozenset[str]
    frequency: dict[str, float]


def pool_selected_features(fits: list[LassoFit]) -> PooledSelection:
    """Union the selected supports of fits sharing one feature dictionary."""
    if not fits:
        raise ValueError("no fits to pool")
    names = fits[0].feature_names
    for f in fits[1:]:
        if f.feature_names != names:
            raise ValueError("fits have mismatched feature dictionaries")
    counts: dict[str, int] = {}
    for f in fits:
        for name in f.selected_features:
            counts[name] = counts.get(name, 0) + 1
    m = len(fits)
    freq = {name: counts[name] / m for name in sorted(counts)}
    return PooledSelection(frozenset(counts), freq)
