"""
Quantile binning of feature columns for histogram split search.

Every feature gets at most `max_bins - 1` value bins; MISSING (NaN) always lands in the
last bin, `max_bins - 1`. A row falls in value bin b when thresholds[b-1] < x <= thresholds[b],
so a split after bin b is the same test as `x <= thresholds[b]` on raw values.
"""

import numpy as np


class BinMapper:
    """Learns per-feature bin thresholds from training data"""

    def __init__(self, max_bins: int = 256):
        self.max_bins = max_bins
        self.missing_bin = max_bins - 1
        self.thresholds: list[np.ndarray] = []

    def fit(self, values: np.ndarray) -> "BinMapper":
        self.thresholds = [self._fit_column(values[:, j]) for j in range(values.shape[1])]
        return self

    def _fit_column(self, col: np.ndarray) -> np.ndarray:
        present = col[~np.isnan(col)]
        if present.size == 0:
            return np.empty(0)
        distinct = np.unique(present)
        max_value_bins = self.max_bins - 1
        if distinct.size <= max_value_bins:
            return (distinct[:-1] + distinct[1:]) / 2.0
        quantiles = np.linspace(0.0, 1.0, max_value_bins + 1)[1:-1]
        return np.unique(np.quantile(present, quantiles, method="midpoint"))

    @property
    def n_value_bins(self) -> np.ndarray:
        """Number of non-missing bins per feature"""
        return np.array([len(t) + 1 for t in self.thresholds], dtype=np.int64)

    def transform(self, values: np.ndarray) -> np.ndarray:
        dtype = np.uint8 if self.max_bins <= 256 else np.uint16
        binned = np.empty(values.shape, dtype=dtype)
        for j, thresholds in enumerate(self.thresholds):
            col = values[:, j]
            bins = np.searchsorted(thresholds, col, side="left")
            bins[np.isnan(col)] = self.missing_bin
            binned[:, j] = bins
        return binned
