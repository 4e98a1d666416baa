"""Cholesky factorization for precision matrices with tree-ancestor sparsity.

For a design ``U`` whose rows are leaf-to-root indicator paths, the matrix
``Q = U' diag(w) U + diag(d)`` has a non-zero at ``(j, a)`` only when ``a`` is
an ancestor of ``j``, and ``Q[j, a] = W[j]`` where ``W = U' w`` is the
subtree weight.  Eliminating the deepest columns first creates no fill-in, and
all columns at one depth can be eliminated together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError


@dataclass
class TreeCholesky:
    """Factor ``L`` stored per depth level: pivots and ancestor multipliers."""

    levels: list[tuple[np.ndarray, np.ndarray]]
    pivots: list[np.ndarray]
    multipliers: list[np.ndarray]
    size: int

    def forward(self, r: np.ndarray) -> np.ndarray:
        """Solve ``L y = r``."""
        r = np.array(r, dtype=float)
        y = np.empty(self.size)
        for (cols, anc), piv, mult in zip(reversed(self.levels), reversed(self.pivots), reversed(self.multipliers)):
            if len(cols) == 0:
                continue
            y[cols] = r[cols] / piv
            for s in range(anc.shape[1]):
                r -= np.bincount(anc[:, s], weights=mult[:, s] * y[cols], minlength=self.size)
        return y

    def backward(self, y: np.ndarray) -> np.ndarray:
        """Solve ``L' x = y``."""
        x = np.empty(self.size)
        for (cols, anc), piv, mult in zip(self.levels, self.pivots, self.multipliers):
            if len(cols) == 0:
                continue
            acc = y[cols] - (mult * x[anc]).sum(axis=1) if anc.shape[1] else y[cols]
            x[cols] = acc / piv
        return x

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self.backward(self.forward(b))

    def sample(self, b: np.ndarray, rng) -> np.ndarray:
        """Draw from ``N(Q^{-1} b, Q^{-1})``."""
        return self.backward(self.forward(b) + rng.standard_normal(self.size))

    def logdet(self) -> float:
        return 2.0 * float(sum(np.log(p).sum() for p in self.pivots))


def tree_cholesky(levels, subtree_weight: np.ndarray, prior_precision: np.ndarray) -> TreeCholesky:
    """Factor ``Q`` with ``Q[j, j] = W[j] + d[j]`` and ``Q[j, a] = W[j]`` for ancestors ``a``.

    ``levels`` is :attr:`DesignMatrix.levels`: per depth, the columns and
    their ancestor columns (shallowest first).
    """
    size = len(subtree_weight)
    diag = np.asarray(subtree_weight, dtype=float) + np.asarray(prior_precision, dtype=float)
    # off[d][r, t] = Q[cols[r], anc[r, t]]
    off = [np.repeat(np.asarray(subtree_weight, dtype=float)[cols][:, None], anc.shape[1], axis=1) for cols, anc in levels]
    row_of = np.empty(size, dtype=np.int64)
    depth_of = np.empty(size, dtype=np.int64)
    for d, (cols, _) in enumerate(levels):
        row_of[cols] = np.arange(len(cols))
        depth_of[cols] = d

    pivots = [None] * len(levels)
    multipliers = [None] * len(levels)
    for d in range(len(levels) - 1, -1, -1):
        cols, anc = levels[d]
        if len(cols) == 0:
            pivots[d] = np.empty(0)
            multipliers[d] = np.empty((0, 0))
            continue
        piv_sq = diag[cols]
        if np.any(~(piv_sq > 0)):
            raise NumericalError("precision matrix is not positive definite")
        piv = np.sqrt(piv_sq)
        mult = off[d] / piv[:, None]
        pivots[d] = piv
        multipliers[d] = mult
        m = anc.shape[1]
        for s in range(m):
            a_s = anc[:, s]
            diag -= np.bincount(a_s, weights=mult[:, s] ** 2, minlength=size)
            if s == 0:
                continue
            # every column at depth d shares the same depth profile of ancestors
            target_level = int(depth_of[a_s[0]])
            tgt = off[target_level]
            rows = row_of[a_s]
            for t in range(s):
                upd = np.bincount(rows, weights=mult[:, s] * mult[:, t], minlength=tgt.shape[0])
                tgt[:, t] -= upd
    return TreeCholesky(list(levels), pivots, multipliers, size)


def dense_precision(levels, subtree_weight, prior_precision) -> np.ndarray:
    """Materialize ``Q`` densely; used for testing and tiny problems."""
    size = len(subtree_weight)
    Q = np.diag(np.asarray(subtree_weight, dtype=float) + prior_precision)
    for cols, anc in levels:
        for r, c in enumerate(cols):
            for a in anc[r]:
                Q[c, a] = Q[a, c] = subtree_weight[c]
    return Q
