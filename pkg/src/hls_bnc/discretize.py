"""Fayyad-Irani MDLP discretization of numeric columns."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import Dataset


@dataclass(frozen=True)
class DiscretizationModel:
    """Sorted cut points per numeric column index."""

    cuts: dict[int, np.ndarray]

    def n_bins(self, column: int) -> int:
        return len(self.cuts[column]) + 1


def _entropy(counts: np.ndarray) -> np.ndarray:
    """Base-2 entropy along the last axis of a count array."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / total, 0.0)
        terms = np.where(p > 0, p * np.log2(p), 0.0)
    return -terms.sum(axis=-1)


def _boundary_candidates(values: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Split positions ``i`` (cut between ``values[i-1]`` and ``values[i]``) at boundary points.

    A cut between two adjacent distinct values is a boundary point unless every
    sample at both values carries one and the same class.
    """
    change = np.flatnonzero(values[1:] != values[:-1]) + 1
    if len(change) == 0:
        return change
    starts = np.concatenate([[0], change])
    lo = np.minimum.reduceat(labels, starts)
    hi = np.maximum.reduceat(labels, starts)
    pure = lo == hi
    # group g ends at change[g]; the cut between groups g and g+1 is a boundary
    # unless both groups are pure with the same label.
    same = pure[:-1] & pure[1:] & (lo[:-1] == lo[1:])
    return change[~same]


def _split(values, labels, onehot, lo, hi, out):
    n = hi - lo
    if n < 2:
        return
    seg_labels = labels[lo:hi]
    cand = _boundary_candidates(values[lo:hi], seg_labels)
    if len(cand) == 0:
        return
    cum = np.cumsum(onehot[lo:hi], axis=0)
    total = cum[-1]
    left = cum[cand - 1]
    right = total - left
    n_left = cand.astype(float)
    ent_left = _entropy(left)
    ent_right = _entropy(right)
    weighted = (n_left * ent_left + (n - n_left) * ent_right) / n
    best = int(np.argmin(weighted))
    ent = float(_entropy(total))
    gain = ent - weighted[best]
    k = np.count_nonzero(total)
    k1 = np.count_nonzero(left[best])
    k2 = np.count_nonzero(right[best])
    delta = np.log2(3.0**k - 2) - (k * ent - k1 * ent_left[best] - k2 * ent_right[best])
    if gain <= (np.log2(n - 1) + delta) / n:
        return
    pos = lo + int(cand[best])
    _split(values, labels, onehot, lo, pos, out)
    out.append(0.5 * (values[pos - 1] + values[pos]))
    _split(values, labels, onehot, pos, hi, out)


def fit_mdlp(values, labels) -> np.ndarray:
    """Cut points for one numeric column by recursive minimum-entropy splitting.

    A split is accepted only when its information gain exceeds the MDL
    criterion ``(log2(n-1) + delta) / n``.  Cuts are midpoints between the
    adjacent distinct values at a class boundary.
    """
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if values.shape != labels.shape or values.ndim != 1:
        raise ValueError("values and labels must be 1-d arrays of equal length")
    if len(values) == 0:
        return np.empty(0)
    order = np.argsort(values, kind="stable")
    values = values[order]
    labels = labels[order]
    _, labels = np.unique(labels, return_inverse=True)
    onehot = np.eye(labels.max() + 1)[labels]
    cuts: list[float] = []
    _split(values, labels, onehot, 0, len(values), cuts)
    return np.asarray(cuts, dtype=float)


def discretize_values(values, cuts) -> np.ndarray:
    """Bin index = number of cut points at or below the value."""
    return np.searchsorted(np.asarray(cuts, dtype=float), np.asarray(values, dtype=float), side="right")


def fit_discretization(dataset: Dataset) -> DiscretizationModel:
    """Fit MDLP cuts for every numeric column of ``dataset`` against its class."""
    y = dataset.y
    return DiscretizationModel({j: fit_mdlp(dataset.columns[j], y) for j in dataset.numeric_columns})


def apply_discretization(model: DiscretizationModel, dataset: Dataset) -> Dataset:
    updates = {}
    for j, cuts in model.cuts.items():
        if dataset.cardinalities[j] is not None:
            continue
        updates[j] = (discretize_values(dataset.columns[j], cuts), len(cuts) + 1)
    return dataset.replace_columns(updates)


class MDLPDiscretizer(TransformerMixin, BaseEstimator):
    """Supervised MDLP discretizer for numeric feature columns.

    Parameters
    ----------
    columns : sequence of int or None
        Columns to discretize.  ``None`` discretizes every column; the other
        columns pass through unchanged and must already hold integer codes.
    """

    def __init__(self, columns=None):
        self.columns = columns

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        cols = range(X.shape[1]) if self.columns is None else self.columns
        self.cut_points_ = {int(j): fit_mdlp(X[:, j], y) for j in cols}
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "cut_points_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        out = X.copy()
        for j, cuts in self.cut_points_.items():
            out[:, j] = discretize_values(X[:, j], cuts)
        return out.astype(np.int64)
