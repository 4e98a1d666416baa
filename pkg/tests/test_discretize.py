import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hls_bnc.data import Dataset
from hls_bnc.discretize import (
    MDLPDiscretizer,
    apply_discretization,
    discretize_values,
    fit_discretization,
    fit_mdlp,
)


def _ent(labels):
    if len(labels) == 0:
        return 0.0
    _, c = np.unique(labels, return_counts=True)
    p = c / c.sum()
    return float(-(p * np.log2(p)).sum())


def _accepts(labels, left, right):
    """MDL acceptance check written out directly from the stopping rule."""
    n = len(labels)
    ent = _ent(labels)
    e1, e2 = _ent(left), _ent(right)
    gain = ent - (len(left) * e1 + len(right) * e2) / n
    k, k1, k2 = (len(set(x)) for x in (labels, left, right))
    delta = np.log2(3**k - 2) - (k * ent - k1 * e1 - k2 * e2)
    return gain > (np.log2(n - 1) + delta) / n


def test_two_class_step_example():
    # exhaustive check of the three candidate cuts: only the 2|3 one is a boundary
    values, labels = [1, 2, 3, 4], [0, 0, 1, 1]
    assert _accepts(np.array(labels), np.array([0, 0]), np.array([1, 1]))
    cuts = fit_mdlp(values, labels)
    assert len(cuts) == 1 and 2 < cuts[0] < 3


def test_no_cuts_for_pure_or_constant():
    assert len(fit_mdlp([1, 2, 3, 4, 5], [1, 1, 1, 1, 1])) == 0
    assert len(fit_mdlp([2, 2, 2, 2], [0, 1, 0, 1])) == 0
    assert len(fit_mdlp([], [])) == 0


def test_apply_boundary_convention():
    assert discretize_values([2.5], [2.5]).tolist() == [1]
    assert discretize_values([-1.0, 7.0], []).tolist() == [0, 0]
    assert discretize_values([2.0], [1.0, 3.0]).tolist() == [1]


def _reference_mdlp(values, labels):
    """Plain recursive Fayyad-Irani over explicit boundary points."""
    order = np.argsort(values, kind="stable")
    v, c = np.asarray(values, float)[order], np.asarray(labels)[order]
    out = []

    def rec(lo, hi):
        seg_v, seg_c = v[lo:hi], c[lo:hi]
        n = hi - lo
        best, best_w = None, np.inf
        for i in range(1, n):
            if seg_v[i] == seg_v[i - 1]:
                continue
            a = set(seg_c[seg_v == seg_v[i - 1]])
            b = set(seg_c[seg_v == seg_v[i]])
            if len(a) == 1 and a == b:
                continue
            w = (i * _ent(seg_c[:i]) + (n - i) * _ent(seg_c[i:])) / n
            if w < best_w - 1e-12:
                best, best_w = i, w
        if best is None or not _accepts(seg_c, seg_c[:best], seg_c[best:]):
            return
        rec(lo, lo + best)
        out.append(0.5 * (v[lo + best - 1] + v[lo + best]))
        rec(lo + best, hi)

    if len(v):
        rec(0, len(v))
    return np.array(out)


def test_matches_reference_implementation():
    rng = np.random.default_rng(0)
    for _ in range(400):
        n = int(rng.integers(1, 40))
        values = rng.integers(0, 10, n).astype(float)
        labels = rng.integers(0, 3, n)
        np.testing.assert_allclose(fit_mdlp(values, labels), _reference_mdlp(values, labels))


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 2)), min_size=1, max_size=8))
def test_cuts_only_at_boundary_points(pairs):
    values = np.array([v for v, _ in pairs], dtype=float)
    labels = np.array([c for _, c in pairs])
    cuts = fit_mdlp(values, labels)
    assert np.all(np.diff(cuts) > 0)
    distinct = np.unique(values)
    for c in cuts:
        below = distinct[distinct < c].max()
        above = distinct[distinct > c].min()
        lab_below = set(labels[values == below])
        lab_above = set(labels[values == above])
        # a cut between two values that both carry one and the same class is never a boundary
        assert not (len(lab_below) == 1 and lab_below == lab_above)


@settings(max_examples=1000, deadline=None)
@given(
    st.lists(st.floats(-100, 100, allow_nan=False), min_size=0, max_size=6, unique=True),
    st.floats(-200, 200, allow_nan=False),
    st.floats(-200, 200, allow_nan=False),
)
def test_discretization_monotone(cuts, v1, v2):
    cuts = sorted(cuts)
    lo, hi = min(v1, v2), max(v1, v2)
    b = discretize_values([lo, hi], cuts)
    assert b[0] <= b[1]
    assert 0 <= b[0] <= len(cuts) and b[1] <= len(cuts)


def test_dataset_round_trip_refits_only_numeric():
    rng = np.random.default_rng(3)
    x = np.concatenate([rng.normal(0, 1, 50), rng.normal(5, 1, 50)])
    y = np.repeat([0, 1], 50)
    cat = rng.integers(0, 3, 100)
    ds = Dataset((x, cat, y), ("x", "c", "y"), (None, 3, 2), 2)
    model = fit_discretization(ds)
    assert set(model.cuts) == {0}
    out = apply_discretization(model, ds)
    assert out.cardinalities == (len(model.cuts[0]) + 1, 3, 2)
    np.testing.assert_array_equal(out.columns[1], cat)
    assert (out.columns[0][:50] == 0).mean() > 0.9


def test_sklearn_transformer():
    X = np.array([[1.0, 0], [2.0, 1], [3.0, 0], [4.0, 1]])
    y = np.array([0, 0, 1, 1])
    disc = MDLPDiscretizer(columns=[0]).fit(X, y)
    assert disc.get_params() == {"columns": [0]}
    Xt = disc.transform(X)
    assert Xt[:, 0].tolist() == [0, 0, 1, 1]
    assert Xt[:, 1].tolist() == [0, 1, 0, 1]
    with pytest.raises(ValueError):
        disc.transform(X[:, :1])
