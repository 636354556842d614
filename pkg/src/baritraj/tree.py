"""CART regression trees: variance-reduction splits over mixed feature types,
surrogate splits for missing data, weakest-link cost-complexity pruning, and a
bagged ensemble comparator.

Splitting maximizes SSE(parent) - SSE(left) - SSE(right).  Numeric candidates
are midpoints between consecutive distinct sorted values and route rows left
when ``value < threshold``; categorical candidates are found by ordering
categories by mean response and scanning contiguous prefixes, which is optimal
for variance splitting.  Ties break deterministically: lower feature index,
then lower threshold, then fewer left categories.  Rows whose split feature is
missing route through the ranked surrogate list, falling back to the majority
direction.  Trees are immutable after growth and safe for concurrent
prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import features as ft


@dataclass(frozen=True)
class TreeParams:
    """Growth hyperparameters mirroring common recursive-partitioning defaults."""

    minsplit: int = 20
    minbucket: int = 7
    cp: float = 0.01
    max_depth: int = 30
    max_surrogates: int = 5


NUMERIC_THRESHOLD = "numeric_threshold"
CATEGORY_SUBSET = "category_subset"


@dataclass(frozen=True)
class SplitRule:
    """A routing rule; surrogate entries carry their agreement fraction."""

    feature: str
    kind: str
    threshold: float | None = None
    left_categories: frozenset[str] | None = None
    improvement: float = 0.0
    surrogates: tuple["SplitRule", ...] = ()
    majority_direction: str = "left"
    agreement: float | None = None

    def routes_left(self, value) -> bool | None:
        """True/False for an observed value, None when the value is missing."""
        if value is None:
            return None
        if self.kind == NUMERIC_THRESHOLD:
            v = float(value)
            if math.isnan(v):
                return None
            return v < self.threshold
        return str(value) in self.left_categories

    def describe(self) -> str:
        if self.kind == NUMERIC_THRESHOLD:
            return f"{self.feature} < {self.threshold:g}"
        cats = ", ".join(sorted(self.left_categories))
        return f"{self.feature} in {{{cats}}}"


@dataclass(frozen=True)
class TreeNode:
    n: int
    mean: float
    sse: float
    split: SplitRule | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None


@dataclass(frozen=True)
class CpEntry:
    alpha: float
    n_leaves: int
    train_sse: float


@dataclass(frozen=True)
class RegressionTree:
    root: TreeNode
    features_used: frozenset[str]
    params: TreeParams
    cp_table: tuple[CpEntry, ...] = ()

    def n_leaves(self) -> int:
        return _count_leaves(self.root)


def _count_leaves(node: TreeNode) -> int:
    if node.is_leaf:
        return 1
    return _count_leaves(node.left) + _count_leaves(node.right)


def _node_stats(y: np.ndarray, rows: np.ndarray) -> tuple[int, float, float]:
    yr = y[rows]
    mean = float(yr.mean())
    if yr.max() == yr.min():
        return len(rows), mean, 0.0
    return len(rows), mean, float(np.sum((yr - mean) ** 2))


def _observed_mask(col: ft.FeatureColumn, rows: np.ndarray) -> np.ndarray:
    vals = col.values[rows]
    if col.kind == ft.CATEGORICAL:
        return np.array([v is not None for v in vals], dtype=bool)
    return np.isfinite(vals)


def _best_numeric_split(x: np.ndarray, y: np.ndarray, minbucket: int):
    """Best (improvement, threshold) for a numeric column; None when no legal cut."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    if n < 2 * minbucket:
        return None
    s1 = np.cumsum(ys)
    total = s1[-1]
    idx = np.arange(n - 1)
    boundary = xs[:-1] < xs[1:]
    n_left = idx + 1
    legal = boundary & (n_left >= minbucket) & (n - n_left >= minbucket)
    if not np.any(legal):
        return None
    sl = s1[:-1]
    imp = np.full(n - 1, -np.inf)
    nl = n_left[legal].astype(float)
    imp[legal] = sl[legal] ** 2 / nl + (total - sl[legal]) ** 2 / (n - nl) - total**2 / n
    best = int(np.argmax(imp))  # first max = lowest threshold on ties
    thr = (xs[best] + xs[best + 1]) / 2.0
    return float(imp[best]), thr


def _category_stats(vals: np.ndarray, y: np.ndarray):
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for v, yv in zip(vals, y):
        key = str(v)
        sums[key] = sums.get(key, 0.0) + yv
        counts[key] = counts.get(key, 0) + 1
    return sums, counts


def _best_categorical_split(vals: np.ndarray, y: np.ndarray, minbucket: int):
    """Best (improvement, left level set) scanning mean-ordered prefixes."""
    sums, counts = _category_stats(vals, y)
    levels = sorted(counts, key=lambda k: (sums[k] / counts[k], k))
    if len(levels) < 2:
        return None
    n = len(vals)
    total = sum(sums.values())
    best = None
    n_l = 0.0
    s_l = 0.0
    for k in range(len(levels) - 1):
        n_l += counts[levels[k]]
        s_l += sums[levels[k]]
        if n_l < minbucket or n - n_l < minbucket:
            continue
        imp = s_l**2 / n_l + (total - s_l) ** 2 / (n - n_l) - total**2 / n
        if best is None or imp > best[0]:  # strict: fewest left categories wins ties
            best = (float(imp), frozenset(levels[: k + 1]))
    return best


def find_best_split(
    features: dict[str, ft.FeatureColumn],
    y: np.ndarray,
    rows: np.ndarray | None = None,
    params: TreeParams = TreeParams(),
    root_sse: float | None = None,
    candidate_features: list[str] | None = None,
) -> SplitRule | None:
    """Best variance-reducing split at a node, or None when nothing qualifies.

    Improvement is evaluated on rows where the candidate feature is observed;
    a split qualifies only when its improvement is positive and at least
    ``cp * root_sse`` (the node's own SSE when ``root_sse`` is omitted).
    """
    y = np.asarray(y, dtype=float)
    rows = np.arange(len(y)) if rows is None else np.asarray(rows, dtype=int)
    if root_sse is None:
        _, _, root_sse = _node_stats(y, rows)
    names = candidate_features if candidate_features is not None else list(features)

    best_imp = 0.0
    best_rule = None
    for name in names:
        col = features[name]
        obs = _observed_mask(col, rows)
        if obs.sum() < 2 * params.minbucket:
            continue
        yo = y[rows[obs]]
        if col.kind == ft.CATEGORICAL:
            found = _best_categorical_split(col.values[rows][obs], yo, params.minbucket)
            if found is None:
                continue
            imp, left_cats = found
            rule = SplitRule(name, CATEGORY_SUBSET, left_categories=left_cats, improvement=imp)
        else:
            found = _best_numeric_split(col.values[rows][obs].astype(float), yo, params.minbucket)
            if found is None:
                continue
            imp, thr = found
            rule = SplitRule(name, NUMERIC_THRESHOLD, threshold=thr, improvement=imp)
        if imp > best_imp:  # strict: earlier feature wins ties
            best_imp, best_rule = imp, rule

    if best_rule is None or best_imp <= 0 or best_imp < params.cp * root_sse:
        return None
    return best_rule


def compute_surrogates(
    features: dict[str, ft.FeatureColumn],
    rows: np.ndarray,
    primary: SplitRule,
    params: TreeParams = TreeParams(),
) -> tuple[tuple[SplitRule, ...], str]:
    """Ranked surrogates for a primary split plus the majority direction.

    A candidate's agreement is the fraction of rows (both features observed)
    it routes the same way as the primary.  Candidates must strictly beat the
    majority-rule baseline max(p_left, p_right), computed over rows where the
    primary feature is observed.  Numeric surrogates keep the primary's
    orientation (low values left); categorical ones may realize either
    orientation through their level subset.
    """
    rows = np.asarray(rows, dtype=int)
    primary_col = features[primary.feature]
    p_obs = _observed_mask(primary_col, rows)
    prim_left = np.zeros(len(rows), dtype=bool)
    obs_idx = np.flatnonzero(p_obs)
    if len(obs_idx):
        prim_left[obs_idx] = _routes_left_vec(primary, primary_col, primary_col.values[rows[obs_idx]])
    n_obs = int(p_obs.sum())
    if n_obs == 0:
        return (), "left"
    n_left = int(prim_left[p_obs].sum())
    p_left = n_left / n_obs
    baseline = max(p_left, 1.0 - p_left)
    majority = "left" if n_left >= n_obs - n_left else "right"

    candidates = []
    for idx, name in enumerate(features):
        if name == primary.feature:
            continue
        col = features[name]
        both = p_obs & _observed_mask(col, rows)
        n_b = int(both.sum())
        if n_b == 0:
            continue
        z = prim_left[both]
        vals = col.values[rows][both]
        if col.kind == ft.CATEGORICAL:
            agree = 0
            left_cats = []
            counts: dict[str, list[int]] = {}
            for v, zi in zip(vals, z):
                c = counts.setdefault(str(v), [0, 0])
                c[0] += 1
                c[1] += int(zi)
            for level in sorted(counts):
                cnt, cl = counts[level]
                if cl > cnt - cl:  # strict majority goes left; ties route right
                    left_cats.append(level)
                    agree += cl
                else:
                    agree += cnt - cl
            if not left_cats or len(left_cats) == len(counts):
                continue  # degenerate one-sided rule, no better than the majority fallback
            rule = SplitRule(name, CATEGORY_SUBSET, left_categories=frozenset(left_cats))
        else:
            x = vals.astype(float)
            order = np.argsort(x, kind="stable")
            xs, zs = x[order], z[order].astype(int)
            if len(xs) < 2:
                continue
            c1 = np.cumsum(zs)
            total1 = c1[-1]
            idx_b = np.flatnonzero(xs[:-1] < xs[1:])
            if len(idx_b) == 0:
                continue
            nl = idx_b + 1
            agree_at = c1[idx_b] + ((len(xs) - nl) - (total1 - c1[idx_b]))
            j = int(np.argmax(agree_at))  # first max = lowest threshold
            agree = int(agree_at[j])
            thr = (xs[idx_b[j]] + xs[idx_b[j] + 1]) / 2.0
            rule = SplitRule(name, NUMERIC_THRESHOLD, threshold=thr)
        fraction = agree / n_b
        if fraction > baseline:
            candidates.append((-fraction, idx, replace(rule, agreement=fraction)))

    candidates.sort(key=lambda t: (t[0], t[1]))
    surrogates = tuple(rule for _, _, rule in candidates[: params.max_surrogates])
    return surrogates, majority


def _routes_left_vec(rule: SplitRule, col: ft.FeatureColumn, vals: np.ndarray) -> np.ndarray:
    """Vectorized routing over observed values (caller masks missing cells)."""
    if rule.kind == NUMERIC_THRESHOLD:
        return vals.astype(float) < rule.threshold
    return np.array([str(v) in rule.left_categories for v in vals], dtype=bool)


def _route_rows(features, rows: np.ndarray, split: SplitRule) -> tuple[np.ndarray, np.ndarray]:
    """Partition node rows using the primary rule, surrogates, then majority."""
    state = np.zeros(len(rows), dtype=np.int8)  # 0 undecided, 1 left, 2 right
    for rule in (split, *split.surrogates):
        undecided = state == 0
        if not np.any(undecided):
            break
        col = features[rule.feature]
        idx = np.flatnonzero(undecided)
        observed = _observed_mask(col, rows[idx])
        use = idx[observed]
        if len(use) == 0:
            continue
        left = _routes_left_vec(rule, col, col.values[rows[use]])
        state[use] = np.where(left, 1, 2).astype(np.int8)
    state[state == 0] = 1 if split.majority_direction == "left" else 2
    return rows[state == 1], rows[state == 2]


def grow_tree(
    features: dict[str, ft.FeatureColumn],
    y: np.ndarray,
    params: TreeParams | None = None,
    rng: np.random.Generator | None = None,
    mtry: int | None = None,
) -> RegressionTree:
    """Grow a tree by deterministic depth-first recursive partitioning.

    ``rng``/``mtry`` enable per-node random feature subsampling for ensembles;
    without them every feature is a candidate at every node.  A chosen split
    is kept only if its improvement, recomputed over the fully routed children
    (missing rows included), still clears the cp gate, so the stored
    improvement always equals parent SSE minus children SSE.
    """
    params = params or TreeParams()
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ValueError("cannot grow a tree on empty data")
    names = list(features)
    used: set[str] = set()
    _, _, root_sse = _node_stats(y, np.arange(len(y)))

    def build(rows: np.ndarray, depth: int) -> TreeNode:
        n, mean, sse = _node_stats(y, rows)
        if n < params.minsplit or depth >= params.max_depth or sse == 0.0:
            return TreeNode(n, mean, sse)
        if rng is not None and mtry is not None and mtry < len(names):
            chosen = rng.choice(len(names), size=mtry, replace=False)
            candidates = [names[i] for i in sorted(chosen)]
        else:
            candidates = names
        rule = find_best_split(features, y, rows, params, root_sse, candidates)
        if rule is None:
            return TreeNode(n, mean, sse)
        surrogates, majority = compute_surrogates(features, rows, rule, params)
        rule = replace(rule, surrogates=surrogates, majority_direction=majority)
        rows_l, rows_r = _route_rows(features, rows, rule)
        if len(rows_l) == 0 or len(rows_r) == 0:
            return TreeNode(n, mean, sse)
        _, _, sse_l = _node_stats(y, rows_l)
        _, _, sse_r = _node_stats(y, rows_r)
        realized = sse - sse_l - sse_r
        if realized <= 0 or realized < params.cp * root_sse:
            return TreeNode(n, mean, sse)
        used.add(rule.feature)
        used.update(s.feature for s in rule.surrogates)
        left = build(rows_l, depth + 1)
        right = build(rows_r, depth + 1)
        stored = replace(rule, improvement=sse - left.sse - right.sse)
        return TreeNode(n, mean, sse, stored, left, right)

    root = build(np.arange(len(y)), 0)
    tree = RegressionTree(root, frozenset(used), params)
    sequence = cost_complexity_prune(tree)
    return replace(tree, cp_table=sequence.cp_table)


def tree_predict(tree: RegressionTree, row: dict) -> float:
    """Route one row (missing values allowed) to a leaf and return its mean."""
    node = tree.root
    while not node.is_leaf:
        split = node.split
        side = split.routes_left(row.get(split.feature))
        if side is None:
            for surrogate in split.surrogates:
                side = surrogate.routes_left(row.get(surrogate.feature))
                if side is not None:
                    break
        if side is None:
            side = split.majority_direction == "left"
        node = node.left if side else node.right
    return node.mean


def tree_predict_many(tree: RegressionTree, rows: list[dict]) -> np.ndarray:
    return np.array([tree_predict(tree, row) for row in rows])


def _subtree_stats(node: TreeNode, pruned: set[str], path: str) -> tuple[int, float]:
    if node.is_leaf or path in pruned:
        return 1, node.sse
    ll, sl = _subtree_stats(node.left, pruned, path + "L")
    lr, sr = _subtree_stats(node.right, pruned, path + "R")
    return ll + lr, sl + sr


def _internal_nodes(node: TreeNode, pruned: set[str], path: str, out: list):
    if node.is_leaf or path in pruned:
        return
    out.append((path, node))
    _internal_nodes(node.left, pruned, path + "L", out)
    _internal_nodes(node.right, pruned, path + "R", out)


def _rebuild(node: TreeNode, pruned: frozenset[str], path: str) -> TreeNode:
    if node.is_leaf or path in pruned:
        return TreeNode(node.n, node.mean, node.sse)
    return TreeNode(
        node.n,
        node.mean,
        node.sse,
        node.split,
        _rebuild(node.left, pruned, path + "L"),
        _rebuild(node.right, pruned, path + "R"),
    )


def _collect_features(node: TreeNode, out: set[str]):
    if node.is_leaf:
        return
    out.add(node.split.feature)
    out.update(s.feature for s in node.split.surrogates)
    _collect_features(node.left, out)
    _collect_features(node.right, out)


@dataclass(frozen=True)
class PruningSequence:
    """Nested weakest-link subtree sequence with strictly increasing breakpoints."""

    tree: RegressionTree
    cp_table: tuple[CpEntry, ...]
    pruned_sets: tuple[frozenset[str], ...]

    def subtree(self, alpha: float) -> RegressionTree:
        """The cost-complexity-optimal subtree for penalty ``alpha``."""
        k = 0
        for i, entry in enumerate(self.cp_table):
            if entry.alpha <= alpha:
                k = i
        pruned = self.pruned_sets[k]
        root = _rebuild(self.tree.root, pruned, "")
        used: set[str] = set()
        _collect_features(root, used)
        return RegressionTree(root, frozenset(used), self.tree.params, self.cp_table)


def cost_complexity_prune(tree: RegressionTree) -> PruningSequence:
    """Weakest-link pruning: repeatedly collapse the internal nodes with the
    smallest per-leaf SSE gain, merging ties so breakpoints strictly increase."""
    pruned: set[str] = set()
    leaves, sse = _subtree_stats(tree.root, pruned, "")
    entries = [CpEntry(0.0, leaves, sse)]
    sets = [frozenset()]

    while True:
        internal: list = []
        _internal_nodes(tree.root, pruned, "", internal)
        if not internal:
            break
        gains = {}
        for path, node in internal:
            sub_leaves, sub_sse = _subtree_stats(node, pruned, path)
            gains[path] = (node.sse - sub_sse) / (sub_leaves - 1)
        alpha = min(gains.values())
        tol = 1e-12 * (1.0 + abs(alpha))
        while True:
            for path, g in gains.items():
                if g <= alpha + tol:
                    pruned.add(path)
            internal = []
            _internal_nodes(tree.root, pruned, "", internal)
            if not internal:
                break
            gains = {}
            repeat = False
            for path, node in internal:
                sub_leaves, sub_sse = _subtree_stats(node, pruned, path)
                g = (node.sse - sub_sse) / (sub_leaves - 1)
                gains[path] = g
                if g <= alpha + tol:
                    repeat = True
            if not repeat:
                break
        leaves, sse = _subtree_stats(tree.root, pruned, "")
        entries.append(CpEntry(float(alpha), leaves, sse))
        sets.append(frozenset(pruned))

    return PruningSequence(tree, tuple(entries), tuple(sets))


def render_tree(tree: RegressionTree) -> str:
    """Indented textual view of nodes, split rules, and surrogates."""
    lines: list[str] = []

    def walk(node: TreeNode, indent: int, label: str):
        head = f"{'  ' * indent}{label} n={node.n} mean={node.mean:.3f}"
        if node.is_leaf:
            lines.append(head + "  (leaf)")
            return
        split = node.split
        head += f"  split: {split.describe()}  (improvement {split.improvement:.3f})"
        if split.surrogates:
            surr = "; ".join(f"{s.describe()} [agree {s.agreement:.2f}]" for s in split.surrogates)
            head += f"  surrogates: {surr}"
        head += f"  missing -> {split.majority_direction}"
        lines.append(head)
        walk(node.left, indent + 1, "[L]")
        walk(node.right, indent + 1, "[R]")

    walk(tree.root, 0, "[root]")
    return "\n".join(lines)


@dataclass(frozen=True)
class BaggedEnsemble:
    """Mean of trees grown on bootstrap resamples with per-node feature subsets."""

    trees: tuple[RegressionTree, ...]
    params: TreeParams

    def predict(self, row: dict) -> float:
        return float(np.mean([tree_predict(t, row) for t in self.trees]))

    def predict_many(self, rows: list[dict]) -> np.ndarray:
        preds = np.stack([tree_predict_many(t, rows) for t in self.trees])
        return preds.mean(axis=0)


def fit_bagged_ensemble(
    features: dict[str, ft.FeatureColumn],
    y: np.ndarray,
    n_trees: int,
    params: TreeParams | None = None,
    seed: int = 0,
    bootstrap: bool = True,
    mtry: int | None = None,
) -> BaggedEnsemble:
    """Fit ``n_trees`` trees on bootstrap resamples; ``mtry`` defaults to
    ceil(p / 3) features per node.  With ``bootstrap=False`` and ``mtry=p`` a
    single member reproduces ``grow_tree`` exactly."""
    if n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    params = params or TreeParams()
    y = np.asarray(y, dtype=float)
    n = len(y)
    p = len(features)
    mtry_eff = mtry if mtry is not None else math.ceil(p / 3)

    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        resampled = {name: col.with_values(col.values[rows]) for name, col in features.items()}
        trees.append(grow_tree(resampled, y[rows], params, rng=rng, mtry=mtry_eff))
    return BaggedEnsemble(tuple(trees), params)
