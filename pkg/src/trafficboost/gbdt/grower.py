"""
Level-wise growth of one regression tree from gradient/hessian histograms.

Split gain is G_L^2/(H_L+l2) + G_R^2/(H_R+l2) - G^2/(H+l2); leaf values are
-G/(H+l2) * learning_rate. MISSING rows are tried on both sides of every candidate split
and the better side is stored as the node's default direction.
"""

from dataclasses import dataclass

import numpy as np

from .base import ObjectiveError, TrainingError
from .binning import BinMapper
from .models import GbdtParams, Objective, ObjectiveKind, Tree

# Guards divisions when l2_reg is 0 and a node carries no hessian
EPS = np.finfo(np.float64).eps
# Splits must improve the objective by more than this
MIN_SPLIT_GAIN = 1e-12


@dataclass
class _Histogram:
    g: np.ndarray  # (n_features, max_bins)
    h: np.ndarray
    c: np.ndarray

    def __sub__(self, other: "_Histogram") -> "_Histogram":
        return _Histogram(self.g - other.g, self.h - other.h, self.c - other.c)


@dataclass
class _SplitInfo:
    gain: float
    feature: int
    bin: int
    default_left: bool


@dataclass
class _Node:
    rows: np.ndarray
    depth: int
    index: int
    sum_g: float
    sum_h: float
    histogram: _Histogram | None = None


class TreeGrower:
    """Grows a single tree for one output dimension.

    Args:
        binned (np.ndarray): binned training features, (n_rows, n_features).
        mapper (BinMapper): mapper that produced `binned`; provides split thresholds.
        params (GbdtParams): depth, leaf size, regularisation and column sampling.
        rng (np.random.Generator): drives per-level column sampling.
    """

    def __init__(
        self,
        binned: np.ndarray,
        mapper: BinMapper,
        params: GbdtParams,
        rng: np.random.Generator,
    ):
        self.binned = binned
        self.mapper = mapper
        self.params = params
        self.rng = rng
        self.max_bins = mapper.max_bins
        self.n_value_bins = mapper.n_value_bins

    def grow(
        self,
        gradients: np.ndarray,
        hessians: np.ndarray,
        rows: np.ndarray,
        features: np.ndarray,
    ) -> tuple[Tree, np.ndarray]:
        """Grow a tree on `rows` using only columns in `features` (sorted).

        Returns:
            tuple[Tree, np.ndarray]: the tree and the leaf index of every row in `rows`.
        """
        if rows.size == 0:
            raise TrainingError("Cannot grow a tree on zero rows")
        self._g, self._h, self._features = gradients, hessians, features

        feature, threshold, default_left = [], [], []
        left, right, value, gain, count = [], [], [], [], []

        def new_node(rows: np.ndarray, depth: int) -> _Node:
            node = _Node(
                rows=rows,
                depth=depth,
                index=len(feature),
                sum_g=float(gradients[rows].sum()),
                sum_h=float(hessians[rows].sum()),
            )
            feature.append(-1)
            threshold.append(np.nan)
            default_left.append(True)
            left.append(-1)
            right.append(-1)
            value.append(self._leaf_value(node.sum_g, node.sum_h))
            gain.append(0.0)
            count.append(rows.size)
            return node

        leaf_of_row = np.empty(self.binned.shape[0], dtype=np.int64)
        root = new_node(rows, 0)
        root.histogram = self._histogram(rows)
        level = [root]
        for depth in range(self.params.max_depth + 1):
            if not level:
                break
            allowed = self._level_features() if depth < self.params.max_depth else None
            next_level: list[_Node] = []
            for node in level:
                split = None if allowed is None else self._best_split(node, allowed)
                if split is None:
                    leaf_of_row[node.rows] = node.index
                    continue
                go_left = self._goes_left(node.rows, split)
                lchild = new_node(node.rows[go_left], depth + 1)
                rchild = new_node(node.rows[~go_left], depth + 1)
                if depth + 1 < self.params.max_depth:
                    # histogram of the smaller child, the sibling by subtraction
                    small, large = (
                        (lchild, rchild)
                        if lchild.rows.size <= rchild.rows.size
                        else (rchild, lchild)
                    )
                    small.histogram = self._histogram(small.rows)
                    large.histogram = node.histogram - small.histogram
                node.histogram = None

                j = self._features[split.feature]
                feature[node.index] = int(j)
                threshold[node.index] = float(self.mapper.thresholds[j][split.bin])
                default_left[node.index] = split.default_left
                left[node.index] = lchild.index
                right[node.index] = rchild.index
                gain[node.index] = split.gain
                next_level.extend([lchild, rchild])
            level = next_level

        tree = Tree(
            feature=np.array(feature, dtype=np.int32),
            threshold=np.array(threshold, dtype=np.float64),
            default_left=np.array(default_left, dtype=bool),
            left=np.array(left, dtype=np.int32),
            right=np.array(right, dtype=np.int32),
            value=np.array(value, dtype=np.float64),
            gain=np.array(gain, dtype=np.float64),
            count=np.array(count, dtype=np.int64),
        )
        return tree, leaf_of_row[rows]

    def _leaf_value(self, sum_g: float, sum_h: float) -> float:
        return -sum_g / max(sum_h + self.params.l2_reg, EPS) * self.params.learning_rate

    def _level_features(self) -> np.ndarray:
        """Positions (into the tree's feature list) usable at this level"""
        n = len(self._features)
        k = max(1, int(round(self.params.colsample_bylevel * n)))
        return np.sort(self.rng.choice(n, size=k, replace=False))

    def _histogram(self, rows: np.ndarray) -> _Histogram:
        n_feat = len(self._features)
        size = n_feat * self.max_bins
        codes = self.binned[np.ix_(rows, self._features)].astype(np.int64)
        codes += np.arange(n_feat, dtype=np.int64) * self.max_bins
        codes = codes.ravel()
        g = np.bincount(codes, weights=np.repeat(self._g[rows], n_feat), minlength=size)
        h = np.bincount(codes, weights=np.repeat(self._h[rows], n_feat), minlength=size)
        c = np.bincount(codes, minlength=size).astype(np.float64)
        shape = (n_feat, self.max_bins)
        return _Histogram(g.reshape(shape), h.reshape(shape), c.reshape(shape))

    def _best_split(self, node: _Node, allowed: np.ndarray) -> _SplitInfo | None:
        hist = node.histogram
        lam = self.params.l2_reg
        msl = self.params.min_samples_leaf
        missing = self.max_bins - 1
        if node.rows.size < 2 * msl:
            return None

        G, H, C = node.sum_g, node.sum_h, float(node.rows.size)
        g_miss = hist.g[allowed, missing][:, None]
        h_miss = hist.h[allowed, missing][:, None]
        c_miss = hist.c[allowed, missing][:, None]
        # split after bin b: bins 0..b on the left
        g_cum = np.cumsum(hist.g[allowed, :missing], axis=1)
        h_cum = np.cumsum(hist.h[allowed, :missing], axis=1)
        c_cum = np.cumsum(hist.c[allowed, :missing], axis=1)
        n_bins = self.n_value_bins[self._features[allowed]][:, None]
        candidate = np.arange(missing)[None, :] < n_bins - 1

        parent = G * G / max(H + lam, EPS)
        gains = []
        for missing_left in (True, False):
            gl = g_cum + (g_miss if missing_left else 0.0)
            hl = h_cum + (h_miss if missing_left else 0.0)
            cl = c_cum + (c_miss if missing_left else 0.0)
            gr, hr, cr = G - gl, H - hl, C - cl
            gain = (
                gl * gl / np.maximum(hl + lam, EPS)
                + gr * gr / np.maximum(hr + lam, EPS)
                - parent
            )
            valid = candidate & (cl >= msl) & (cr >= msl)
            gains.append(np.where(valid, gain, -np.inf))

        # (feature, bin, direction) order: first boundary wins ties, default-left first
        stacked = np.stack(gains, axis=-1)
        best = int(np.argmax(stacked))
        f_pos, b, d = np.unravel_index(best, stacked.shape)
        best_gain = float(stacked[f_pos, b, d])
        if not best_gain > MIN_SPLIT_GAIN:
            return None
        return _SplitInfo(
            gain=best_gain,
            feature=int(allowed[f_pos]),
            bin=int(b),
            default_left=bool(d == 0),
        )

    def _goes_left(self, rows: np.ndarray, split: _SplitInfo) -> np.ndarray:
        bins = self.binned[rows, self._features[split.feature]]
        is_missing = bins == self.max_bins - 1
        return np.where(is_missing, split.default_left, bins <= split.bin)


def refine_leaves(
    tree: Tree,
    objective: Objective,
    residuals: np.ndarray,
    leaf_ids: np.ndarray,
    learning_rate: float,
) -> Tree:
    """Replace every leaf value with the median residual of its rows times learning_rate.

    Args:
        tree (Tree): freshly grown tree.
        objective (Objective): must be the absolute-error objective.
        residuals (np.ndarray): target minus current prediction for the tree's training rows.
        leaf_ids (np.ndarray): leaf reached by each of those rows.
        learning_rate (float): shrinkage applied to the medians.

    Raises:
        ObjectiveError: objective is not absolute error.
        TrainingError: a leaf received no training rows.
    """
    if objective.kind is not ObjectiveKind.ABSOLUTE_ERROR:
        raise ObjectiveError(
            f"Leaf refinement applies to absolute error only, got: {objective.kind.value}"
        )
    value = tree.value.copy()
    for leaf in np.flatnonzero(tree.is_leaf):
        in_leaf = residuals[leaf_ids == leaf]
        if in_leaf.size == 0:
            raise TrainingError(f"Leaf {leaf} received no training rows")
        value[leaf] = np.median(in_leaf) * learning_rate
    return tree.model_copy(update={"value": value})
