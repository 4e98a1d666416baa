"""CPT branching trees and the sparse ancestor-indicator design matrix."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import softmax

from .data import Dataset
from .structure import CLASS, MiTable, NetworkStructure, compute_mi_tables

INTERCEPT = -1


@dataclass(frozen=True)
class CptTree:
    """Tree over ordered parent values for one child node.

    Nodes (excluding the root) are numbered breadth first; within a depth
    they follow the mixed-radix order of the parent values, first parent most
    significant.  Leaves are the depth-``p`` nodes, so leaf ``l`` has column
    ``offsets[p] + l``.
    """

    child: int
    parents: tuple[int, ...]
    parent_cards: tuple[int, ...]
    child_card: int

    @property
    def depth(self) -> int:
        return len(self.parents)

    @cached_property
    def level_sizes(self) -> np.ndarray:
        """Node count at depths 1..p."""
        return np.cumprod(np.asarray(self.parent_cards, dtype=np.int64))

    @cached_property
    def offsets(self) -> np.ndarray:
        """Column of the first node at each depth; ``offsets[d]`` for d = 1..p, ``offsets[0] = 0``."""
        return np.concatenate([[0, 0], np.cumsum(self.level_sizes)[:-1]]).astype(np.int64)

    @property
    def n_leaves(self) -> int:
        return int(self.level_sizes[-1]) if self.depth else 1

    @property
    def n_nodes(self) -> int:
        return int(self.level_sizes.sum()) if self.depth else 0

    @cached_property
    def strides(self) -> np.ndarray:
        """Leaf-index weight of each ordered parent."""
        cards = np.asarray(self.parent_cards, dtype=np.int64)
        return np.concatenate([np.cumprod(cards[::-1])[::-1][1:], [1]]).astype(np.int64)[: self.depth]

    def leaf_index(self, parent_values: np.ndarray) -> np.ndarray:
        """Leaf ids for an ``(n, p)`` array of ordered parent values (clipped to range)."""
        parent_values = np.asarray(parent_values, dtype=np.int64).reshape(-1, self.depth)
        if self.depth == 0:
            return np.zeros(len(parent_values), dtype=np.int64)
        clipped = np.clip(parent_values, 0, np.asarray(self.parent_cards) - 1)
        return clipped @ self.strides

    def parent_values(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Gather ordered parent columns from attribute matrix ``X`` and class vector ``y``."""
        cols = [y if a == CLASS else X[:, a] for a in self.parents]
        if not cols:
            return np.zeros((len(y), 0), dtype=np.int64)
        return np.column_stack(cols).astype(np.int64)

    def node_depth(self, node: int) -> int:
        return int(np.searchsorted(self.offsets[1:], node, side="right"))

    def node_path(self, node: int) -> tuple[int, ...]:
        d = self.node_depth(node)
        q = node - int(self.offsets[d])
        return tuple(int(v) for v in np.unravel_index(q, self.parent_cards[:d])) if d else ()

    def nodes(self) -> list[tuple[int, tuple[int, ...]]]:
        """``(depth, path)`` for every non-root node in column order."""
        return [(self.node_depth(j), self.node_path(j)) for j in range(self.n_nodes)]

    def leaf_ancestors(self, leaves: np.ndarray) -> np.ndarray:
        """Node ids on the path of each leaf, shape ``(len(leaves), p)``, shallowest first."""
        leaves = np.asarray(leaves, dtype=np.int64)
        if self.depth == 0:
            return np.zeros((len(leaves), 0), dtype=np.int64)
        below = self.n_leaves // self.level_sizes
        return self.offsets[1:, None].T + leaves[:, None] // below[None, :]

    def level_counts(self, counts: np.ndarray, depth: int) -> np.ndarray:
        """Aggregate leaf counts up to the nodes at ``depth`` (0 = root)."""
        counts = np.asarray(counts)
        if depth == 0:
            return counts.sum(axis=0, keepdims=True)
        size = int(self.level_sizes[depth - 1])
        return counts.reshape(size, -1, counts.shape[1]).sum(axis=1)


def order_parents(child: int, parents, mi: MiTable) -> tuple[int, ...]:
    """Class first, then attributes by descending I(X_a; X_child | Y), ties to lower index."""
    attrs = [a for a in parents if a != CLASS]
    attrs.sort(key=lambda a: (-mi.cmi[child, a], a))
    return ((CLASS,) if CLASS in parents else ()) + tuple(attrs)


def build_tree(dataset: Dataset, structure: NetworkStructure, child_index: int, mi: MiTable | None = None) -> CptTree:
    """Tree for attribute ``child_index`` (or ``CLASS``, which has no parents)."""
    cards = dataset.attribute_cardinalities()
    if child_index == CLASS:
        return CptTree(CLASS, (), (), dataset.n_classes)
    parents = structure.parents[child_index]
    if mi is None and len(parents) > 2:
        mi = compute_mi_tables(dataset)
    ordered = order_parents(child_index, parents, mi) if mi is not None else tuple(parents)
    pcards = tuple(dataset.n_classes if a == CLASS else cards[a] for a in ordered)
    return CptTree(child_index, ordered, pcards, cards[child_index])


def aggregate_counts(dataset: Dataset, tree: CptTree) -> np.ndarray:
    """``(L, |X_c|)`` multinomial counts of child values per leaf."""
    X = dataset.attribute_matrix()
    y = dataset.y
    child = y if tree.child == CLASS else X[:, tree.child]
    return counts_from_values(tree, tree.parent_values(X, y), child)


def counts_from_values(tree: CptTree, parent_values: np.ndarray, child_values: np.ndarray) -> np.ndarray:
    leaves = tree.leaf_index(parent_values)
    child_values = np.clip(np.asarray(child_values, dtype=np.int64), 0, tree.child_card - 1)
    flat = np.bincount(leaves * tree.child_card + child_values, minlength=tree.n_leaves * tree.child_card)
    return flat.reshape(tree.n_leaves, tree.child_card).astype(float)


@dataclass(frozen=True)
class DesignMatrix:
    """Sparse 0/1 design ``U`` (rows x columns) with per-row child-value counts.

    ``columns[c]`` is the tree node behind column ``c`` (``INTERCEPT`` for an
    all-ones column).  Rows are leaves, or individual observations after
    :func:`duplicate_rows`; ``row_leaf`` maps rows back to leaves.
    """

    U: sp.csr_matrix
    columns: np.ndarray
    tree: CptTree
    counts: np.ndarray | None = None
    row_leaf: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.U.shape

    @property
    def has_intercept(self) -> bool:
        return bool(np.any(self.columns == INTERCEPT))

    @property
    def column_depth(self) -> np.ndarray:
        return np.array([0 if c == INTERCEPT else self.tree.node_depth(c) for c in self.columns], dtype=np.int64)

    def with_counts(self, counts: np.ndarray) -> "DesignMatrix":
        counts = np.asarray(counts, dtype=float)
        if counts.shape[0] != self.U.shape[0]:
            raise ValueError("counts must have one row per design row")
        return DesignMatrix(self.U, self.columns, self.tree, counts, self.row_leaf)

    @cached_property
    def levels(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Columns grouped by depth with their ancestor columns.

        Entry ``d`` is ``(cols, anc)`` where ``anc[r]`` lists the column
        positions of every ancestor of ``cols[r]`` (intercept included),
        shallowest first.  Every column at one depth has the same number of
        ancestors, which the tree factorization relies on.
        """
        tree = self.tree
        position = {int(c): i for i, c in enumerate(self.columns)}
        depth = self.column_depth
        out = []
        for d in range(0, tree.depth + 1):
            cols = np.flatnonzero(depth == d)
            if len(cols) == 0:
                out.append((cols, np.zeros((0, 0), dtype=np.int64)))
                continue
            anc = []
            for c in cols:
                node = int(self.columns[c])
                chain = [position[INTERCEPT]] if (self.has_intercept and node != INTERCEPT) else []
                if node != INTERCEPT:
                    q = node - int(tree.offsets[d])
                    for t in range(1, d):
                        prefix = q // int(np.prod(tree.parent_cards[t:d], dtype=np.int64))
                        chain.append(position[int(tree.offsets[t]) + prefix])
                anc.append(chain)
            out.append((cols, np.asarray(anc, dtype=np.int64).reshape(len(cols), -1)))
        return out


def can_drop_last_column(tree: CptTree, intercept: bool) -> bool:
    """Dropping the last leaf column keeps the model saturated only if that leaf keeps a predictor."""
    return tree.depth >= 2 or (intercept and tree.depth >= 1)


def build_design(
    tree: CptTree,
    drop_last_column: bool = False,
    intercept: bool = False,
    counts: np.ndarray | None = None,
) -> DesignMatrix:
    """Ancestor-indicator design: ``U[i, j] = 1`` iff node ``j`` is leaf ``i`` or one of its ancestors.

    ``drop_last_column`` removes the final (deepest, last-valued) column when
    that leaf still has an ancestor predictor; for a depth-1 tree without an
    intercept it is ignored because the leaf would be pinned to uniform.
    """
    L, N, p = tree.n_leaves, tree.n_nodes, tree.depth
    leaves = np.arange(L)
    cols = tree.leaf_ancestors(leaves)
    rows = np.repeat(leaves, p)
    U = sp.csr_matrix((np.ones(L * p), (rows, cols.ravel())), shape=(L, N))
    columns = np.arange(N, dtype=np.int64)
    if intercept:
        U = sp.hstack([sp.csr_matrix(np.ones((L, 1))), U], format="csr")
        columns = np.concatenate([[INTERCEPT], columns])
    if drop_last_column and N and can_drop_last_column(tree, intercept):
        U = U[:, :-1].tocsr()
        columns = columns[:-1]
    U.sort_indices()
    if counts is not None:
        counts = np.asarray(counts, dtype=float)
    return DesignMatrix(U, columns, tree, counts, leaves)


def duplicate_rows(design: DesignMatrix) -> DesignMatrix:
    """Categorical form of a count design: one one-hot row per observation."""
    counts = np.rint(design.counts).astype(np.int64)
    leaf, value = np.nonzero(counts)
    reps = counts[leaf, value]
    row_leaf = np.repeat(leaf, reps)
    row_value = np.repeat(value, reps)
    onehot = np.zeros((len(row_leaf), counts.shape[1]))
    onehot[np.arange(len(row_leaf)), row_value] = 1.0
    return DesignMatrix(design.U[row_leaf], design.columns, design.tree, onehot, design.row_leaf[row_leaf])


def linear_predictor(B: np.ndarray, design: DesignMatrix) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.shape[0] != design.U.shape[1]:
        raise ValueError(f"coefficient rows {B.shape[0]} do not match design columns {design.U.shape[1]}")
    return np.asarray(design.U @ B)


def predict_cpt(B: np.ndarray, design: DesignMatrix, n_values: int | None = None) -> np.ndarray:
    """Row-wise softmax of ``U @ B``; returns the ``(rows, |X_c|)`` CPT."""
    if design.U.shape[1] == 0:
        k = n_values or (B.shape[1] if np.ndim(B) == 2 else design.tree.child_card)
        return np.full((design.U.shape[0], k), 1.0 / k)
    return softmax(linear_predictor(B, design), axis=1)


def export_coo(design: DesignMatrix, path: str | Path) -> None:
    """Write the non-zeros as ``row col 1`` lines."""
    coo = design.U.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# {design.U.shape[0]} {design.U.shape[1]}\n")
        for r, c in zip(coo.row[order], coo.col[order]):
            fh.write(f"{r} {c} 1\n")


def read_coo(path: str | Path) -> sp.csr_matrix:
    with open(path) as fh:
        header = fh.readline().lstrip("#").split()
        shape = (int(header[0]), int(header[1]))
        data = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix(shape)
    return sp.csr_matrix((data[:, 2].astype(float), (data[:, 0], data[:, 1])), shape=shape)
