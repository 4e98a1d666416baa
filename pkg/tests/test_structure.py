import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hls_bnc.data import Dataset
from hls_bnc.structure import (
    CLASS,
    MiTable,
    NetworkStructure,
    compute_mi_tables,
    learn_kdb,
    learn_structure,
    learn_tan,
)


def _brute_cmi(a, b, c):
    n = len(a)
    total = 0.0
    for av, bv, cv in set(zip(a, b, c)):
        pabc = sum(1 for i in range(n) if (a[i], b[i], c[i]) == (av, bv, cv)) / n
        pc = sum(1 for i in range(n) if c[i] == cv) / n
        pac = sum(1 for i in range(n) if (a[i], c[i]) == (av, cv)) / n
        pbc = sum(1 for i in range(n) if (b[i], c[i]) == (bv, cv)) / n
        total += pabc * math.log(pabc * pc / (pac * pbc))
    return total


def test_identical_binary_gives_ln2():
    x = np.array([0, 1, 0, 1])
    mi = compute_mi_tables(Dataset.from_arrays(x[:, None], x, [2], 2))
    assert mi.mi_with_class[0] == pytest.approx(math.log(2))


def test_independent_full_factorial_gives_zero():
    X = np.array(list(itertools.product([0, 1], [0, 1, 2])))
    mi = compute_mi_tables(Dataset.from_arrays(X[:, 1:], X[:, 0], [3], 2))
    assert mi.mi_with_class[0] == pytest.approx(0.0, abs=1e-15)


def test_cmi_matches_triple_loop(toy3):
    mi = compute_mi_tables(toy3)
    X, y = toy3.attribute_matrix(), toy3.y
    for i, j in itertools.combinations(range(3), 2):
        expected = _brute_cmi(X[:, i].tolist(), X[:, j].tolist(), y.tolist())
        assert mi.cmi[i, j] == pytest.approx(expected, abs=1e-12)
        assert mi.cmi[j, i] == mi.cmi[i, j]


def _table(mi_cls, cmi_pairs, p):
    cmi = np.zeros((p, p))
    for (i, j), w in cmi_pairs.items():
        cmi[i, j] = cmi[j, i] = w
    return MiTable(np.asarray(mi_cls, float), cmi)


def test_tan_single_attribute():
    s = learn_tan(_table([0.1], {}, 1))
    assert s.parents == ((CLASS,),)


def test_tan_three_attribute_spanning_tree():
    weights = {(0, 1): 0.5, (0, 2): 0.1, (1, 2): 0.4}
    # enumerate the three spanning trees and keep the heaviest
    trees = [frozenset(t) for t in itertools.combinations(weights, 2)]
    best = max(trees, key=lambda t: sum(weights[e] for e in t))
    s = learn_tan(_table([0.3, 0.2, 0.1], weights, 3))
    edges = {tuple(sorted((i, a))) for i in range(3) for a in s.attribute_parents(i)}
    assert edges == set(best) == {(0, 1), (1, 2)}
    assert s.parents == ((CLASS,), (CLASS, 0), (CLASS, 1))


def test_tan_ties_pick_lowest_pairs():
    s = learn_tan(_table([0, 0, 0, 0], {(i, j): 1.0 for i, j in itertools.combinations(range(4), 2)}, 4))
    assert s.parents == ((CLASS,), (CLASS, 0), (CLASS, 0), (CLASS, 0))
    assert learn_tan(_table([0] * 4, {}, 4)) == s


def test_kdb_zero_is_naive_bayes():
    s = learn_kdb(_table([0.3, 0.1, 0.2], {(0, 1): 0.5}, 3), 0)
    assert all(p == (CLASS,) for p in s.parents)


def test_kdb_saturates():
    mi = _table([0.4, 0.3, 0.2, 0.1], {(0, 1): 0.1, (2, 3): 0.2}, 4)
    s = learn_kdb(mi, 5)
    assert [len(s.attribute_parents(i)) for i in range(4)] == [0, 1, 2, 3]


def test_kdb_four_attribute_fixture():
    # ranking by MI with class: 2, 0, 3, 1
    mi = _table(
        [0.30, 0.05, 0.40, 0.20],
        {(0, 1): 0.01, (0, 2): 0.20, (0, 3): 0.02, (1, 2): 0.03, (1, 3): 0.25, (2, 3): 0.10},
        4,
    )
    s = learn_kdb(mi, 2)
    assert s.parents[2] == (CLASS,)
    assert s.parents[0] == (CLASS, 2)
    assert s.parents[3] == (CLASS, 2, 0)
    assert s.parents[1] == (CLASS, 3, 2)


def test_structure_json_round_trip():
    s = NetworkStructure(((CLASS,), (CLASS, 0), (CLASS, 0, 1)), "kdb", 2)
    assert NetworkStructure.from_json(s.to_json()) == s
    assert s.topological_order() == [0, 1, 2]


def test_cycle_detected():
    s = NetworkStructure(((CLASS, 1), (CLASS, 0)), "kdb", 1)
    with pytest.raises(ValueError):
        s.topological_order()


def test_learn_structure_dispatch(toy3):
    s, mi = learn_structure(toy3, "kdb", 1)
    assert s.kind == "kdb" and isinstance(mi, MiTable)
    with pytest.raises(ValueError):
        learn_structure(toy3, "bogus")


@st.composite
def mi_tables(draw, distinct=False):
    p = draw(st.integers(1, 7))
    mi = draw(st.lists(st.floats(0, 1), min_size=p, max_size=p, unique=True))
    w = draw(st.lists(st.floats(0, 1), min_size=p * p, max_size=p * p, unique=distinct))
    cmi = np.array(w).reshape(p, p)
    cmi = np.triu(cmi, 1)
    return MiTable(np.array(mi), cmi + cmi.T)


@settings(max_examples=1000, deadline=None)
@given(mi_tables(), st.integers(0, 4))
def test_learned_structures_valid(mi, k):
    p = len(mi.mi_with_class)
    tan = learn_tan(mi)
    assert len(tan.topological_order()) == p
    assert sum(len(tan.attribute_parents(i)) for i in range(p)) == p - 1
    assert all(len(tan.attribute_parents(i)) <= 1 and tan.parents[i][0] == CLASS for i in range(p))
    kdb = learn_kdb(mi, k)
    assert len(kdb.topological_order()) == p
    assert all(len(kdb.attribute_parents(i)) <= k for i in range(p))


@settings(max_examples=1000, deadline=None)
@given(mi_tables(distinct=True), st.integers(0, 3), st.randoms(use_true_random=False))
def test_kdb_permutation_invariant(mi, k, rnd):
    p = len(mi.mi_with_class)
    perm = list(range(p))
    rnd.shuffle(perm)
    inv = np.argsort(perm)
    permuted = MiTable(mi.mi_with_class[perm], mi.cmi[np.ix_(perm, perm)])
    a = learn_kdb(mi, k)
    b = learn_kdb(permuted, k)
    for i in range(p):
        mapped = [perm[j] for j in b.attribute_parents(int(inv[i]))]
        assert mapped == list(a.attribute_parents(i))
