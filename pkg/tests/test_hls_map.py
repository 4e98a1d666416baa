import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hls_bnc.cpt_tree import CptTree, build_design, duplicate_rows, predict_cpt
from hls_bnc.exceptions import ConfigError
from hls_bnc.hls_map import (
    INTERVAL_GRID,
    NAIVE_GRID,
    PenaltyConfig,
    fit_lasso,
    fit_ridge,
    fit_ridge_cv,
    ridge_objective,
    split_counts,
)
from oracles import central_difference, dense_lasso, dense_ridge
from hls_bnc.structure import CLASS


def _design(cards, K, counts, **kw):
    tree = CptTree(0, tuple(range(1, len(cards) + 1)), tuple(cards), K)
    return build_design(tree, counts=np.asarray(counts, dtype=float), **kw)


def test_zero_parents_gives_marginal():
    B, rep = fit_ridge(_design((), 3, [[2, 1, 1]]), 1.0)
    assert B.shape == (0, 3) and rep.converged


def test_huge_tau_shrinks_to_uniform():
    d = _design((2, 2), 3, np.arange(12).reshape(4, 3))
    B, rep = fit_ridge(d, 1e8)
    assert np.linalg.norm(B) <= 1e-3
    np.testing.assert_allclose(predict_cpt(B, d), 1 / 3, atol=1e-6)


def test_depth1_against_dense_oracle():
    d = _design((2,), 2, [[3, 1], [0, 4]])
    B, rep = fit_ridge(d, 1.0)
    assert rep.converged and rep.grad_norm <= 1e-6
    theta_ref, B_ref = dense_ridge(d.U.toarray(), d.counts, 1.0)
    np.testing.assert_allclose(B, B_ref, atol=1e-4)
    np.testing.assert_allclose(predict_cpt(B, d), theta_ref, atol=1e-6)


def test_tau_zero_recovers_empirical():
    counts = np.array([[3, 1], [2, 6], [1, 1], [5, 2]])
    d = _design((2, 2), 2, counts, drop_last_column=True)
    B, rep = fit_ridge(d, 0.0)
    assert rep.converged
    np.testing.assert_allclose(predict_cpt(B, d), counts / counts.sum(1, keepdims=True), atol=1e-6)


def test_gauge_dropped_column_choice():
    """At tau = 0 the fitted CPT does not depend on which column is dropped."""
    counts = np.array([[3, 1, 2], [2, 6, 1], [1, 1, 4], [5, 2, 2], [1, 3, 3], [2, 2, 1]])
    tree = CptTree(0, (1, 2), (2, 3), 3)
    full = build_design(tree, counts=counts)
    dropped_last = build_design(tree, drop_last_column=True, counts=counts)
    keep = [j for j in range(tree.n_nodes) if j != 4]
    from hls_bnc.cpt_tree import DesignMatrix

    other = DesignMatrix(full.U[:, keep].tocsr(), full.columns[keep], tree, full.counts, full.row_leaf)
    th1 = predict_cpt(fit_ridge(dropped_last, 0.0)[0], dropped_last)
    th2 = predict_cpt(fit_ridge(other, 0.0)[0], other)
    np.testing.assert_allclose(th1, th2, atol=1e-4)


def test_duplicate_row_equivalence():
    rng = np.random.default_rng(4)
    counts = rng.integers(0, 6, (6, 3))
    d = _design((2, 3), 3, counts, drop_last_column=True)
    B_fast, _ = fit_ridge(d, 0.7)
    B_slow, _ = fit_ridge(duplicate_rows(d), 0.7)
    np.testing.assert_allclose(B_fast, B_slow, atol=1e-8)


def test_intercept_column():
    d = _design((3,), 2, [[4, 1], [2, 2], [0, 3]], intercept=True, drop_last_column=True)
    B, rep = fit_ridge(d, 1.0)
    assert rep.converged and B.shape == (3, 2)


def test_objective_decreases_along_iterations():
    d = _design((3, 2), 3, np.random.default_rng(0).integers(0, 9, (6, 3)))
    values = [fit_ridge(d, 0.5, max_iter=i)[1].objective for i in range(1, 8)]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))


def test_negative_tau_rejected():
    d = _design((2,), 2, [[1, 1], [1, 1]])
    with pytest.raises(ConfigError):
        fit_ridge(d, -1)
    with pytest.raises(ConfigError):
        fit_lasso(d, -1)
    with pytest.raises(ConfigError):
        PenaltyConfig(kind="elastic")


def test_lasso_large_tau_is_exactly_zero():
    d = _design((2, 2), 2, [[3, 1], [0, 4], [2, 2], [1, 5]])
    B, rep = fit_lasso(d, 1e3)
    assert rep.converged and np.all(B == 0)


def test_lasso_tau_zero_matches_ridge():
    d = _design((2,), 2, [[3, 1], [1, 4]])
    np.testing.assert_allclose(fit_lasso(d, 0.0)[0], fit_ridge(d, 0.0)[0], atol=1e-4)


def test_lasso_against_dense_oracle():
    d = _design((2,), 2, [[3, 1], [0, 4]])
    B, rep = fit_lasso(d, 1.0)
    assert rep.converged and rep.grad_norm <= 1e-5
    theta_ref, B_ref = dense_lasso(d.U.toarray(), d.counts, 1.0)
    # the l1 optimum is not unique in B (shifting a row keeps |B|_1 for K=2), only in theta
    np.testing.assert_allclose(predict_cpt(B, d), theta_ref, atol=1e-4)
    obj = lambda b: ridge_objective(d, b, 0.0)[0] + np.abs(b).sum()
    assert obj(B) == pytest.approx(obj(B_ref), abs=1e-8)


def test_cv_no_signal_picks_largest():
    d = _design((2,), 2, [[10, 10], [10, 10]])
    _, tau = fit_ridge_cv(d, INTERVAL_GRID, n_folds=5, seed=0)
    assert tau == 5.0


def test_cv_separable_picks_small():
    d = _design((2,), 2, [[20, 0], [0, 20]])
    _, tau = fit_ridge_cv(d, INTERVAL_GRID, n_folds=5, seed=0)
    assert tau <= 0.5


def test_cv_single_grid_point_and_fallback():
    d = _design((2,), 2, [[3, 4], [5, 1]])
    np.testing.assert_allclose(fit_ridge_cv(d, [1.0])[0], fit_ridge(d, 1.0)[0])
    tiny = _design((2,), 2, [[1, 0], [0, 1]])
    assert fit_ridge_cv(tiny, NAIVE_GRID, n_folds=5)[1] == 1.0


def test_split_counts_partitions():
    counts = np.array([[3, 0, 2], [1, 4, 0]], dtype=float)
    folds = split_counts(counts, 3, np.random.default_rng(0))
    np.testing.assert_array_equal(sum(folds), counts)
    assert sorted(f.sum() for f in folds) == [3, 3, 4]


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(1, 3), min_size=1, max_size=2),
    st.integers(2, 3),
    st.floats(0.0, 3.0),
    st.data(),
)
def test_gradient_matches_finite_differences(cards, K, tau, data):
    tree = CptTree(0, tuple(range(1, len(cards) + 1)), tuple(cards), K)
    L = tree.n_leaves
    counts = np.array(data.draw(st.lists(st.integers(0, 5), min_size=L * K, max_size=L * K))).reshape(L, K)
    d = build_design(tree, counts=counts)
    B = np.array(data.draw(st.lists(st.floats(-2, 2), min_size=d.shape[1] * K, max_size=d.shape[1] * K))).reshape(-1, K)
    _, G = ridge_objective(d, B, tau)
    fd = central_difference(lambda b: ridge_objective(d, b, tau)[0], B)
    assert np.abs(G - fd).max() <= 1e-5 * max(1.0, np.abs(fd).max())


def test_hessian_assemblies_and_cg_direction_agree():
    from hls_bnc.hls_map import _as_vec, _Problem, _newton_direction
    import hls_bnc.hls_map as hm

    rng = np.random.default_rng(0)
    d = _design((3, 2), 3, rng.integers(0, 6, (6, 3)))
    p = _Problem(d, d.counts)
    theta = rng.dirichlet(np.ones(3), len(p.n))
    extra = rng.uniform(0.5, 2.0, d.shape[1] * 3)
    H = p.hessian(theta, extra)
    np.testing.assert_allclose(p.hessian_blocks(theta, extra).toarray(), H.toarray(), atol=1e-12)
    v = rng.standard_normal(H.shape[0])
    np.testing.assert_allclose(p.hessp(theta, extra, v), H @ v, atol=1e-12)
    np.testing.assert_allclose(p.hessian_diagonal(theta, extra), H.diagonal(), atol=1e-12)
    g = _as_vec(rng.standard_normal((d.shape[1], 3)))
    explicit = _newton_direction(p, theta, extra, g)
    old = hm.HESSIAN_ENTRY_LIMIT, hm.BLOCK_CLASS_LIMIT
    try:
        hm.HESSIAN_ENTRY_LIMIT, hm.BLOCK_CLASS_LIMIT = 0, 0
        iterative = _newton_direction(p, theta, extra, g)
    finally:
        hm.HESSIAN_ENTRY_LIMIT, hm.BLOCK_CLASS_LIMIT = old
    np.testing.assert_allclose(iterative, explicit, rtol=1e-7, atol=1e-9)
