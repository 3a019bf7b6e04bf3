"""CART trees over sparse features: random forest (Gini) and GBDT.

Split search works on a column-major layout sorted by value once per fit.
Each column also carries one pseudo-entry at value 0 that stands for all
samples without a stored value in that column; its statistics are the
node totals minus the column's stored entries. Candidate thresholds lie
midway between consecutive distinct values and ``x <= threshold`` goes
left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from ..dataset import Dataset
from ..errors import ContractError, TrainingError

_MIN_GAIN = 1e-12


@dataclass
class Tree:
    """Flattened binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    weight: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, lookup: "SparseLookup") -> np.ndarray:
        """Leaf index reached by every row of the matrix behind ``lookup``."""
        node = np.zeros(lookup.n_rows, dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            f = self.feature[cur]
            x = lookup.get(active, f)
            node[active] = np.where(x <= self.threshold[cur], self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, lookup: "SparseLookup") -> np.ndarray:
        return self.value[self.apply(lookup)]

    def to_params(self) -> dict:
        return {
            "feature": [int(v) for v in self.feature],
            "threshold": [float(v) for v in self.threshold],
            "left": [int(v) for v in self.left],
            "right": [int(v) for v in self.right],
            "value": [float(v) for v in self.value],
            "gain": [float(v) for v in self.gain],
            "weight": [float(v) for v in self.weight],
        }

    @classmethod
    def from_params(cls, p: dict) -> "Tree":
        ints = {k: np.array(p[k], dtype=np.int64) for k in ("feature", "left", "right")}
        floats = {k: np.array(p[k], dtype=np.float64) for k in ("threshold", "value", "gain", "weight")}
        return cls(**ints, **floats)


class SparseLookup:
    """Vectorized ``X[rows, cols]`` for a CSR matrix with sorted indices."""

    def __init__(self, X: sp.csr_matrix):
        X = sp.csr_matrix(X)
        X.sort_indices()
        self.n_rows, self.n_cols = X.shape
        row_of = np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(X.indptr))
        self._keys = row_of * self.n_cols + X.indices.astype(np.int64)
        self._data = X.data

    def get(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        keys = rows.astype(np.int64) * self.n_cols + cols
        pos = np.searchsorted(self._keys, keys)
        pos_c = np.minimum(pos, len(self._keys) - 1)
        out = np.zeros(len(keys))
        if len(self._keys):
            hit = self._keys[pos_c] == keys
            out[hit] = self._data[pos_c[hit]]
        return out


class _SplitSearch:
    def __init__(self, X: sp.csr_matrix, criterion: str, min_leaf: float):
        csc = sp.csc_matrix(X, dtype=np.float64, copy=True)
        csc.eliminate_zeros()
        csc.sort_indices()
        self.csc = csc
        self.n, self.d = csc.shape
        self.criterion = criterion
        self.min_leaf = min_leaf
        col_of = np.repeat(np.arange(self.d, dtype=np.int64), np.diff(csc.indptr))
        cols = np.concatenate([col_of, np.arange(self.d, dtype=np.int64)])
        vals = np.concatenate([csc.data, np.zeros(self.d)])
        rows = np.concatenate([csc.indices.astype(np.int64), np.full(self.d, -1, dtype=np.int64)])
        order = np.lexsort((vals, cols))
        self.cols, self.vals, self.rows = cols[order], vals[order], rows[order]
        self.col_ptr = np.searchsorted(self.cols, np.arange(self.d + 1)).astype(np.int64)
        self.all_columns = np.arange(self.d, dtype=np.int64)

    def column(self, j: int) -> np.ndarray:
        x = np.zeros(self.n)
        lo, hi = self.csc.indptr[j], self.csc.indptr[j + 1]
        x[self.csc.indices[lo:hi]] = self.csc.data[lo:hi]
        return x

    def best_split(self, node_stats: np.ndarray, columns=None):
        """Best ``(gain, feature, threshold)`` or ``None``.

        ``node_stats`` has shape ``(n, 2)``: sample weight (zero outside the
        node) and the weighted target (label for Gini, residual for MSE).
        """
        if columns is None:
            columns = self.all_columns
        w = np.ascontiguousarray(node_stats[:, 0])
        t = np.ascontiguousarray(node_stats[:, 1])
        gain, col, lo, hi = _scan_columns(
            np.asarray(columns, dtype=np.int64),
            self.col_ptr,
            self.vals,
            self.rows,
            w,
            t,
            float(w.sum()),
            float(t.sum()),
            float(self.min_leaf),
            self.criterion == "gini",
        )
        if col < 0:
            return None
        threshold = lo + (hi - lo) / 2.0
        if threshold >= hi:
            threshold = lo
        return float(gain), int(col), float(threshold)


@numba.njit(cache=True)
def _split_gain(lw, ls, rw, rs, tw, ts, gini):
    if gini:
        parent = (ts * ts + (tw - ts) ** 2) / tw
        return (ls * ls + (lw - ls) ** 2) / lw + (rs * rs + (rw - rs) ** 2) / rw - parent
    return ls * ls / lw + rs * rs / rw - ts * ts / tw


@numba.njit(cache=True)
def _scan_columns(columns, col_ptr, vals, rows, w, t, total_w, total_t, min_leaf, gini):
    # Entries of each column are sorted by value; rows[e] == -1 is the
    # column's zero block, whose stats are the node totals minus the rest.
    best_gain = _MIN_GAIN
    best_col = -1
    best_lo = 0.0
    best_hi = 0.0
    for c in columns:
        lo, hi = col_ptr[c], col_ptr[c + 1]
        cw = 0.0
        ct = 0.0
        for e in range(lo, hi):
            r = rows[e]
            if r >= 0:
                cw += w[r]
                ct += t[r]
        zw = total_w - cw
        zt = total_t - ct
        lw = 0.0
        lt = 0.0
        prev = 0.0
        started = False
        for e in range(lo, hi):
            r = rows[e]
            if r >= 0:
                ew = w[r]
                et = t[r]
            else:
                ew = zw
                et = zt
            if ew <= 0.0:
                continue
            v = vals[e]
            if started and v > prev:
                rw = total_w - lw
                if lw >= min_leaf and rw >= min_leaf:
                    g = _split_gain(lw, lt, rw, total_t - lt, total_w, total_t, gini)
                    if g > best_gain:
                        best_gain = g
                        best_col = c
                        best_lo = prev
                        best_hi = v
            lw += ew
            lt += et
            prev = v
            started = True
    return best_gain, best_col, best_lo, best_hi


class _Builder:
    """Grows one tree depth-first, recording node arrays."""

    def __init__(self, search: _SplitSearch, max_depth: int, leaf_value, choose_columns=None):
        self.search = search
        self.max_depth = max_depth
        self.leaf_value = leaf_value
        self.choose_columns = choose_columns
        self.nodes: list[list] = []
        self.leaf_of = np.full(search.n, -1, dtype=np.int64)

    def grow(self, sample_stats: np.ndarray, rows: np.ndarray) -> Tree:
        self.sample_stats = sample_stats
        self._node(rows, 0)
        a = list(zip(*self.nodes))
        return Tree(
            feature=np.array(a[0], dtype=np.int64),
            threshold=np.array(a[1], dtype=np.float64),
            left=np.array(a[2], dtype=np.int64),
            right=np.array(a[3], dtype=np.int64),
            value=np.array(a[4], dtype=np.float64),
            gain=np.array(a[5], dtype=np.float64),
            weight=np.array(a[6], dtype=np.float64),
        )

    def _find(self, node_stats):
        if self.choose_columns is None:
            return self.search.best_split(node_stats)
        for columns in self.choose_columns():
            found = self.search.best_split(node_stats, columns)
            if found is not None:
                return found
        return None

    def _node(self, rows: np.ndarray, depth: int) -> int:
        nid = len(self.nodes)
        st = self.sample_stats[rows]
        w, s = float(st[:, 0].sum()), float(st[:, 1].sum())
        self.nodes.append([-1, 0.0, -1, -1, self.leaf_value(rows), 0.0, w])

        found = None
        splittable = depth < self.max_depth and w >= 2 * self.search.min_leaf
        if splittable and self.search.criterion == "gini":
            splittable = 0.0 < s < w
        if splittable:
            node_stats = np.zeros((self.search.n, 2))
            node_stats[rows] = st
            found = self._find(node_stats)
        if found is None:
            self.leaf_of[rows] = nid
            return nid

        gain, feature, threshold = found
        go_left = self.search.column(feature)[rows] <= threshold
        left = self._node(rows[go_left], depth + 1)
        right = self._node(rows[~go_left], depth + 1)
        self.nodes[nid][:4] = [feature, threshold, left, right]
        self.nodes[nid][5] = gain
        return nid


def _check_common(data: Dataset, max_depth: int, min_leaf: int) -> None:
    if max_depth < 0:
        raise ContractError(f"max_depth must be >= 0, got {max_depth}")
    if min_leaf < 1:
        raise ContractError(f"min_leaf must be >= 1, got {min_leaf}")
    if min_leaf >= len(data):
        raise TrainingError(f"min_leaf={min_leaf} leaves no room to split {len(data)} samples")
    y = data.labels
    if y.all() or not y.any():
        raise TrainingError("training data must contain both classes")


# ---------------------------------------------------------------------------
# Random forest


@dataclass
class ForestModel:
    trees: list[Tree]
    n_features: int

    @property
    def dimension(self) -> int:
        return self.n_features

    def decision(self, X: sp.csr_matrix) -> np.ndarray:
        """Mean over trees of the leaf's positive fraction."""
        lookup = SparseLookup(X)
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total += t.predict(lookup)
        return total / len(self.trees)

    def importances(self) -> np.ndarray:
        imp = np.zeros(self.n_features)
        for t in self.trees:
            internal = t.feature >= 0
            np.add.at(imp, t.feature[internal], t.gain[internal])
        return imp / len(self.trees)

    def to_params(self) -> dict:
        return {"n_features": self.n_features, "trees": [t.to_params() for t in self.trees]}

    @classmethod
    def from_params(cls, p: dict) -> "ForestModel":
        return cls([Tree.from_params(t) for t in p["trees"]], int(p["n_features"]))


def default_mtry(dimension: int) -> int:
    return max(1, math.ceil(math.sqrt(dimension)))


def train_random_forest(
    data: Dataset,
    n_trees: int = 100,
    max_depth: int = 8,
    mtry: int | None = None,
    min_leaf: int = 1,
    seed: int = 0,
) -> ForestModel:
    """Bootstrap-aggregated Gini trees.

    Tree ``t`` draws its bootstrap sample and its per-node feature subsets
    from a generator seeded with ``seed + t``. At each node ``mtry``
    features are drawn without replacement; if none of them admits a
    useful split the next ``mtry`` from the same permutation are tried.
    """
    if n_trees < 1:
        raise ContractError(f"n_trees must be >= 1, got {n_trees}")
    d = data.dimension
    if mtry is None:
        mtry = default_mtry(d)
    if not 1 <= mtry <= d:
        raise ContractError(f"mtry must be in [1, {d}], got {mtry}")
    _check_common(data, max_depth, min_leaf)

    n = len(data)
    y = data.labels.astype(np.float64)
    search = _SplitSearch(data.matrix, "gini", min_leaf)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(seed + t)
        counts = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        stats = np.column_stack([counts, counts * y])

        def columns():
            perm = rng.permutation(d)
            for lo in range(0, d, mtry):
                yield np.sort(perm[lo : lo + mtry])

        def leaf_value(rows, stats=stats):
            w = stats[rows, 0].sum()
            return float(stats[rows, 1].sum() / w) if w > 0 else 0.0

        builder = _Builder(search, max_depth, leaf_value, columns)
        trees.append(builder.grow(stats, np.flatnonzero(counts > 0)))
    return ForestModel(trees, d)


# ---------------------------------------------------------------------------
# Gradient boosting


@dataclass
class GbdtModel:
    initial_score: float
    shrinkage: float
    trees: list[Tree]
    n_features: int

    @property
    def dimension(self) -> int:
        return self.n_features

    def staged_decision(self, X: sp.csr_matrix):
        """Yield the log-odds score after 0, 1, ..., n_stages stages."""
        lookup = SparseLookup(X)
        score = np.full(X.shape[0], self.initial_score)
        yield score.copy()
        for t in self.trees:
            score += self.shrinkage * t.predict(lookup)
            yield score.copy()

    def decision(self, X: sp.csr_matrix) -> np.ndarray:
        lookup = SparseLookup(X)
        score = np.full(X.shape[0], self.initial_score)
        for t in self.trees:
            score += self.shrinkage * t.predict(lookup)
        return score

    def importances(self) -> np.ndarray:
        imp = np.zeros(self.n_features)
        for t in self.trees:
            internal = t.feature >= 0
            np.add.at(imp, t.feature[internal], t.gain[internal])
        return imp

    def to_params(self) -> dict:
        return {
            "initial_score": float(self.initial_score),
            "shrinkage": float(self.shrinkage),
            "n_features": self.n_features,
            "trees": [t.to_params() for t in self.trees],
        }

    @classmethod
    def from_params(cls, p: dict) -> "GbdtModel":
        return cls(
            float(p["initial_score"]),
            float(p["shrinkage"]),
            [Tree.from_params(t) for t in p["trees"]],
            int(p["n_features"]),
        )


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def train_gbdt(
    data: Dataset,
    n_stages: int = 100,
    shrinkage: float = 0.1,
    max_depth: int = 3,
    min_leaf: int = 1,
    seed: int = 0,
) -> GbdtModel:
    """Binomial-deviance gradient boosting.

    Each stage fits a squared-error regression tree to the residuals
    ``y - sigmoid(F)`` and sets each leaf to one Newton step,
    ``sum(residual) / sum(p * (1 - p))``. No subsampling is done, so
    ``seed`` does not affect the result.
    """
    if not 0 < shrinkage <= 1:
        raise ContractError(f"shrinkage must be in (0, 1], got {shrinkage}")
    if n_stages < 0:
        raise ContractError(f"n_stages must be >= 0, got {n_stages}")
    _check_common(data, max_depth, min_leaf)

    y = data.labels.astype(np.float64)
    n = len(data)
    pos_rate = y.mean()
    f0 = math.log(pos_rate / (1.0 - pos_rate))
    score = np.full(n, f0)
    search = _SplitSearch(data.matrix, "mse", min_leaf)
    all_rows = np.arange(n)
    trees = []
    for _ in range(n_stages):
        p = _sigmoid(score)
        residual = y - p
        hessian = p * (1.0 - p)
        stats = np.column_stack([np.ones(n), residual])

        def leaf_value(rows):
            h = hessian[rows].sum()
            return float(residual[rows].sum() / h) if h > 1e-300 else 0.0

        builder = _Builder(search, max_depth, leaf_value)
        tree = builder.grow(stats, all_rows)
        if not np.all(np.isfinite(tree.value)):
            raise TrainingError(f"non-finite leaf value at stage {len(trees) + 1}")
        score = score + shrinkage * tree.value[builder.leaf_of]
        trees.append(tree)
    return GbdtModel(f0, float(shrinkage), trees, data.dimension)
