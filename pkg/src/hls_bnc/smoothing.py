"""Maximum-likelihood and additive (pseudo-count) CPT estimates with back-off."""

from __future__ import annotations

import numpy as np

from .cpt_tree import CptTree
from .exceptions import ConfigError


def additive_cpt(counts: np.ndarray, cardinality: int, m: float, tree: CptTree) -> np.ndarray:
    """``(n + m) / (n_parent + |X_c| m)`` per leaf.

    A leaf with no samples backs off to its nearest ancestor that has at
    least one sample and applies the same formula to that ancestor's pooled
    counts.  If the whole table is empty the result is uniform.  ``m = 0``
    gives the maximum-likelihood estimate.
    """
    if m < 0:
        raise ConfigError(f"pseudo-count m must be non-negative, got {m}")
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (tree.n_leaves, cardinality):
        raise ValueError(f"counts shape {counts.shape} != ({tree.n_leaves}, {cardinality})")

    theta = np.full(counts.shape, 1.0 / cardinality)
    pending = np.ones(tree.n_leaves, dtype=bool)
    leaves = np.arange(tree.n_leaves)
    for depth in range(tree.depth, -1, -1):
        pooled = tree.level_counts(counts, depth)
        node = leaves // (tree.n_leaves // pooled.shape[0])
        totals = pooled.sum(axis=1)
        use = pending & (totals[node] > 0)
        if use.any():
            rows = pooled[node[use]]
            theta[use] = (rows + m) / (totals[node[use]][:, None] + cardinality * m)
            pending &= ~use
        if not pending.any():
            break
    return theta
