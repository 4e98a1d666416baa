"""Categorical datasets: CSV ingestion, fold planning and synthetic generation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import ConfigError, ParseError

MISSING_TOKENS = frozenset({"", "?", "NA", "nan", "NaN"})


@dataclass(frozen=True)
class Schema:
    """Column typing for :func:`load_csv`.

    Columns not listed in ``numeric`` are categorical.
    """

    class_column: str
    numeric: frozenset[str] = frozenset()

    @classmethod
    def from_file(cls, path: str | Path) -> "Schema":
        """Parse a ``key = value`` schema file.

        Recognised keys are ``class`` (the class column name) and any column
        name mapped to ``numeric`` or ``categorical``.  ``#`` starts a comment.
        """
        class_column = None
        numeric = set()
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key == "class":
                class_column = value
            elif value == "numeric":
                numeric.add(key)
            elif value != "categorical":
                raise ConfigError(f"{path}:{lineno}: unknown column type {value!r}")
        if class_column is None:
            raise ConfigError(f"{path}: schema has no 'class' entry")
        return cls(class_column, frozenset(numeric))


@dataclass(frozen=True)
class Dataset:
    """Column-major table of categorical (int) and raw numeric (float) columns.

    ``cardinalities[j]`` is None for a numeric column that has not been
    discretized yet.  ``levels[j]`` holds the original labels of a
    categorical column in code order, when known.
    """

    columns: tuple[np.ndarray, ...]
    names: tuple[str, ...]
    cardinalities: tuple[int | None, ...]
    class_index: int
    levels: tuple[tuple[str, ...] | None, ...] = field(default=())

    def __post_init__(self):
        if len(self.columns) != len(self.names) or len(self.columns) != len(self.cardinalities):
            raise ValueError("columns, names and cardinalities must align")
        if not 0 <= self.class_index < len(self.columns):
            raise ValueError("class_index out of range")
        if self.cardinalities[self.class_index] is None:
            raise ValueError("class column must be categorical")
        lengths = {len(c) for c in self.columns}
        if len(lengths) > 1:
            raise ValueError("columns have different lengths")
        for j, (col, card) in enumerate(zip(self.columns, self.cardinalities)):
            if card is None:
                continue
            if card < 1:
                raise ValueError(f"column {j}: cardinality must be >= 1")
            if len(col) and (col.min() < 0 or col.max() >= card):
                raise ValueError(f"column {j}: value outside [0, {card})")
        if not self.levels:
            object.__setattr__(self, "levels", (None,) * len(self.columns))

    @property
    def n_rows(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    @property
    def attribute_columns(self) -> list[int]:
        return [j for j in range(self.n_columns) if j != self.class_index]

    @property
    def numeric_columns(self) -> list[int]:
        return [j for j, c in enumerate(self.cardinalities) if c is None]

    @property
    def y(self) -> np.ndarray:
        return self.columns[self.class_index]

    @property
    def n_classes(self) -> int:
        return int(self.cardinalities[self.class_index])

    def attribute_matrix(self) -> np.ndarray:
        """Attributes as an ``(n_rows, p)`` int array; all must be categorical."""
        attrs = self.attribute_columns
        if any(self.cardinalities[j] is None for j in attrs):
            raise ValueError("dataset still has numeric columns; discretize first")
        if not attrs:
            return np.zeros((self.n_rows, 0), dtype=np.int64)
        return np.column_stack([self.columns[j] for j in attrs]).astype(np.int64)

    def attribute_cardinalities(self) -> list[int]:
        return [int(self.cardinalities[j]) for j in self.attribute_columns]

    def take(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            tuple(c[rows] for c in self.columns),
            self.names,
            self.cardinalities,
            self.class_index,
            self.levels,
        )

    def replace_columns(self, updates: dict[int, tuple[np.ndarray, int]]) -> "Dataset":
        """Swap in new categorical columns given ``{index: (values, cardinality)}``."""
        columns = list(self.columns)
        cards = list(self.cardinalities)
        for j, (values, card) in updates.items():
            columns[j] = np.asarray(values, dtype=np.int64)
            cards[j] = int(card)
        return Dataset(tuple(columns), self.names, tuple(cards), self.class_index, self.levels)

    @classmethod
    def from_arrays(cls, X, y, cardinalities=None, n_classes=None, names=None) -> "Dataset":
        """Build a fully categorical dataset with the class as the last column."""
        X = np.asarray(X, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError("X must be 2-dimensional")
        p = X.shape[1]
        if cardinalities is None:
            cardinalities = [int(X[:, j].max()) + 1 if len(X) else 1 for j in range(p)]
        if n_classes is None:
            n_classes = int(y.max()) + 1 if len(y) else 1
        if names is None:
            names = [f"x{j}" for j in range(p)] + ["class"]
        columns = tuple(X[:, j].copy() for j in range(p)) + (y.copy(),)
        return cls(columns, tuple(names), tuple(int(c) for c in cardinalities) + (int(n_classes),), p)


def load_csv(path: str | Path, schema: Schema | str | Path) -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    Categorical columns are label-encoded in order of first appearance;
    numeric columns are kept as floats for later discretization.
    """
    if not isinstance(schema, Schema):
        schema = Schema.from_file(schema)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}",
                    row=lineno,
                )
            rows.append((lineno, row))

    unknown = ({schema.class_column} | set(schema.numeric)) - set(header)
    if unknown:
        raise ConfigError(f"schema names unknown column(s): {sorted(unknown)}")
    if schema.class_column in schema.numeric:
        raise ConfigError("class column cannot be numeric")
    if not rows:
        raise ParseError(f"{path}: no data rows")

    columns, cards, levels = [], [], []
    for j, name in enumerate(header):
        if name in schema.numeric:
            values = np.empty(len(rows))
            for i, (lineno, row) in enumerate(rows):
                try:
                    values[i] = float(row[j])
                except ValueError:
                    raise ParseError(
                        f"{path}: row {lineno}: column {name!r} value {row[j]!r} is not numeric",
                        row=lineno,
                    ) from None
            columns.append(values)
            cards.append(None)
            levels.append(None)
        else:
            codes, labels = encode_labels(row[j].strip() for _, row in rows)
            columns.append(codes)
            cards.append(len(labels))
            levels.append(tuple(labels))
    return Dataset(tuple(columns), tuple(header), tuple(cards), header.index(schema.class_column), tuple(levels))


def encode_labels(values: Iterable[str], known: Sequence[str] | None = None):
    """Label-encode in first-appearance order, optionally seeded with ``known`` labels."""
    table = {v: i for i, v in enumerate(known or ())}
    codes = []
    for v in values:
        if v not in table:
            table[v] = len(table)
        codes.append(table[v])
    return np.asarray(codes, dtype=np.int64), list(table)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: np.ndarray

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(train_rows, test_rows)`` for one fold."""
        test = np.flatnonzero(self.assignment == fold)
        train = np.flatnonzero(self.assignment != fold)
        return train, test

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def make_folds(dataset: Dataset, k: int = 10, seed: int = 0) -> FoldPlan:
    """Stratified, seeded k-fold assignment.

    Rows are shuffled within each class, classes are concatenated and the
    folds dealt round-robin, so fold sizes differ by at most one and each
    class is spread as evenly as its count allows.
    """
    n = dataset.n_rows
    if k < 2:
        raise ConfigError("k must be at least 2")
    if k > n:
        raise ConfigError(f"k={k} exceeds the number of rows ({n})")
    rng = np.random.default_rng(seed)
    y = dataset.y
    order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in range(dataset.n_classes)])
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % k
    return FoldPlan(k, assignment)


def gen_synthetic(p_parents: int, cardinality: int, n_samples: int, seed: int = 0) -> Dataset:
    """Discretized correlated Gaussian data; the last column is the child.

    The correlation matrix is the normalized Gram matrix of a seeded
    standard-normal matrix.  Each dimension is cut into equal-frequency bins.
    """
    if p_parents < 1:
        raise ConfigError("p_parents must be >= 1")
    if cardinality < 2:
        raise ConfigError("cardinality must be >= 2")
    rng = np.random.default_rng(seed)
    d = p_parents + 1
    A = rng.standard_normal((d, d))
    gram = A @ A.T
    scale = np.sqrt(np.diag(gram))
    corr = gram / np.outer(scale, scale)
    chol = np.linalg.cholesky(corr + 1e-12 * np.eye(d))
    Z = rng.standard_normal((n_samples, d)) @ chol.T
    ranks = np.argsort(np.argsort(Z, axis=0, kind="stable"), axis=0, kind="stable")
    bins = (ranks * cardinality) // max(n_samples, 1)
    names = tuple(f"x{j}" for j in range(p_parents)) + ("child",)
    columns = tuple(bins[:, j].astype(np.int64) for j in range(d))
    return Dataset(columns, names, (cardinality,) * d, d - 1)
