"""TAN and kDB structure learning from mutual-information statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset

#: Marker used in parent lists for the class node.
CLASS = -1


@dataclass(frozen=True)
class MiTable:
    """Plug-in information statistics in nats.

    ``mi_with_class[i]`` is I(X_i; Y) and ``cmi[i, j]`` is I(X_i; X_j | Y).
    """

    mi_with_class: np.ndarray
    cmi: np.ndarray


@dataclass(frozen=True)
class NetworkStructure:
    """Ordered parent lists per attribute; the class (``CLASS``) always comes first."""

    parents: tuple[tuple[int, ...], ...]
    kind: str
    k: int | None = None

    @property
    def n_attributes(self) -> int:
        return len(self.parents)

    def attribute_parents(self, i: int) -> tuple[int, ...]:
        return tuple(a for a in self.parents[i] if a != CLASS)

    def topological_order(self) -> list[int]:
        """Kahn's algorithm over attribute edges; raises on a cycle."""
        p = self.n_attributes
        indeg = [len(self.attribute_parents(i)) for i in range(p)]
        children = [[] for _ in range(p)]
        for i in range(p):
            for a in self.attribute_parents(i):
                children[a].append(i)
        ready = [i for i in range(p) if indeg[i] == 0]
        order = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            for c in children[node]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != p:
            raise ValueError("structure contains a cycle")
        return order

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "parents": {str(i): ["class" if a == CLASS else a for a in ps] for i, ps in enumerate(self.parents)},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkStructure":
        parents = doc["parents"]
        ordered = tuple(
            tuple(CLASS if a == "class" else int(a) for a in parents[str(i)]) for i in range(len(parents))
        )
        return cls(ordered, doc["kind"], doc.get("k"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "NetworkStructure":
        return cls.from_dict(json.loads(text))


def _plugin_mi(joint: np.ndarray) -> float:
    """Mutual information (nats) between the two axes of a count table."""
    n = joint.sum()
    if n == 0:
        return 0.0
    pxy = joint / n
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    return float(np.sum(pxy[nz] * np.log(pxy[nz] / (px @ py)[nz])))


def _plugin_cmi(joint: np.ndarray) -> float:
    """I(A; B | C) from a count table indexed ``[a, b, c]``."""
    n = joint.sum()
    if n == 0:
        return 0.0
    p = joint / n
    pc = p.sum(axis=(0, 1))
    pac = p.sum(axis=1)
    pbc = p.sum(axis=0)
    a, b, c = np.nonzero(p)
    vals = p[a, b, c] * np.log(p[a, b, c] * pc[c] / (pac[a, c] * pbc[b, c]))
    return float(vals.sum())


def compute_mi_tables(dataset: Dataset) -> MiTable:
    X = dataset.attribute_matrix()
    cards = dataset.attribute_cardinalities()
    y = dataset.y
    ky = dataset.n_classes
    p = X.shape[1]
    mi = np.zeros(p)
    for i in range(p):
        joint = np.bincount(X[:, i] * ky + y, minlength=cards[i] * ky).reshape(cards[i], ky)
        mi[i] = _plugin_mi(joint)
    cmi = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1, p):
            idx = (X[:, i] * cards[j] + X[:, j]) * ky + y
            joint = np.bincount(idx, minlength=cards[i] * cards[j] * ky).reshape(cards[i], cards[j], ky)
            cmi[i, j] = cmi[j, i] = _plugin_cmi(joint)
    np.maximum(mi, 0.0, out=mi)
    np.maximum(cmi, 0.0, out=cmi)
    return MiTable(mi, cmi)


def learn_tan(mi: MiTable) -> NetworkStructure:
    """Maximum spanning tree on conditional mutual information, rooted at attribute 0.

    Kruskal with edges ordered by descending weight and then by ascending
    ``(i, j)``, so ties always resolve to the lowest index pair.
    """
    p = len(mi.mi_with_class)
    edges = sorted(
        ((i, j) for i in range(p) for j in range(i + 1, p)),
        key=lambda e: (-mi.cmi[e[0], e[1]], e[0], e[1]),
    )
    root = list(range(p))

    def find(a):
        while root[a] != a:
            root[a] = root[root[a]]
            a = root[a]
        return a

    adjacency = [[] for _ in range(p)]
    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            root[ri] = rj
            adjacency[i].append(j)
            adjacency[j].append(i)

    parent = [None] * p
    if p:
        seen = {0}
        queue = [0]
        while queue:
            node = queue.pop(0)
            for nb in sorted(adjacency[node]):
                if nb not in seen:
                    seen.add(nb)
                    parent[nb] = node
                    queue.append(nb)
    parents = tuple((CLASS,) if parent[i] is None else (CLASS, parent[i]) for i in range(p))
    return NetworkStructure(parents, "tan")


def learn_kdb(mi: MiTable, k: int) -> NetworkStructure:
    """K-dependence structure.

    Attributes are ranked by descending I(X; Y).  Each attribute takes as
    parents the class plus the ``min(k, rank)`` earlier-ranked attributes with
    the highest I(X_i; X_j | Y).
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    p = len(mi.mi_with_class)
    ranking = sorted(range(p), key=lambda i: (-mi.mi_with_class[i], i))
    parents: list[tuple[int, ...]] = [()] * p
    for r, node in enumerate(ranking):
        earlier = ranking[:r]
        chosen = sorted(earlier, key=lambda j: (-mi.cmi[node, j], j))[: min(k, r)]
        parents[node] = (CLASS, *chosen)
    return NetworkStructure(tuple(parents), "kdb", k)


def learn_structure(dataset: Dataset, kind: str, k: int | None = None, mi: MiTable | None = None):
    """Dispatch on ``kind`` (``"tan"`` or ``"kdb"``); returns ``(structure, mi_table)``."""
    mi = compute_mi_tables(dataset) if mi is None else mi
    if kind == "tan":
        return learn_tan(mi), mi
    if kind == "kdb":
        return learn_kdb(mi, 0 if k is None else k), mi
    raise ValueError(f"unknown structure kind {kind!r}")
