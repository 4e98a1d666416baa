"""Penalized-likelihood HLS: multinomial logistic regression on the tree design.

The objective is the multinomial negative log-likelihood over (possibly
aggregated) count rows plus a ridge ``tau * ||B||_F^2`` or lasso
``tau * ||B||_1`` penalty.  Counts enter as totals, not averages, so a fixed
``tau`` means the same thing at every sample size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, spsolve
from scipy.special import logsumexp

from .cpt_tree import INTERCEPT, DesignMatrix, predict_cpt
from .exceptions import ConfigError, NumericalError

GRAD_TOL = 1e-6
LASSO_TOL = 1e-5
MAX_ITER = 500
#: Above this many pairwise Hessian entries the explicit pairwise assembly is skipped.
HESSIAN_ENTRY_LIMIT = 5_000_000
#: Past that limit, child cardinalities up to this use per-class-pair products; larger ones use CG.
BLOCK_CLASS_LIMIT = 8
#: Relative ridge weight on an intercept column; keeps the optimum finite when
#: some child value never occurs.
INTERCEPT_PENALTY = 1e-6
#: Candidate taus on [0, 5] for the interval cross-validation.
INTERVAL_GRID = tuple(np.linspace(0.0, 5.0, 11))
#: Wide log grid: tau = 1 / (2 C) for C in logspace(-4, 4, 10).
NAIVE_GRID = tuple(1.0 / (2.0 * np.logspace(-4, 4, 10)))


@dataclass(frozen=True)
class PenaltyConfig:
    kind: str = "ridge"
    tau: float = 1.0
    cv: str = "off"
    grid: tuple[float, ...] = INTERVAL_GRID

    def __post_init__(self):
        if self.kind not in ("ridge", "lasso"):
            raise ConfigError(f"unknown penalty kind {self.kind!r}")
        if self.tau < 0:
            raise ConfigError("tau must be non-negative")
        if self.cv not in ("off", "interval", "naive"):
            raise ConfigError(f"unknown cv mode {self.cv!r}")


@dataclass(frozen=True)
class FitReport:
    objective: float
    iterations: int
    grad_norm: float
    converged: bool


class _Problem:
    """Loss, gradient and Hessian of the penalized multinomial NLL on active rows."""

    def __init__(self, design: DesignMatrix, counts: np.ndarray | None = None):
        counts = design.counts if counts is None else np.asarray(counts, dtype=float)
        if counts is None:
            raise ValueError("design has no counts attached")
        totals = counts.sum(axis=1)
        active = totals > 0
        self.X = design.U[active].tocsr()
        self.XT = self.X.T.tocsr()
        self.Y = counts[active]
        self.n = totals[active]
        self.n_cols = design.U.shape[1]
        self.K = counts.shape[1]
        self.pen = np.where(design.columns == INTERCEPT, INTERCEPT_PENALTY, 1.0)

    def nll(self, W):
        eta = np.asarray(self.X @ W)
        lse = logsumexp(eta, axis=1)
        value = float(self.n @ lse - np.sum(self.Y * eta))
        theta = np.exp(eta - lse[:, None])
        return value, theta

    def ridge(self, W, tau):
        value, theta = self.nll(W)
        value += tau * float(np.sum(self.pen[:, None] * W * W))
        grad = np.asarray(self.XT @ (self.n[:, None] * theta - self.Y)) + 2.0 * tau * self.pen[:, None] * W
        if not np.isfinite(value):
            raise NumericalError(f"non-finite objective (max |B| = {np.abs(W).max():.3g})")
        return value, grad, theta

    @property
    def hessian_entries(self) -> int:
        """Upper bound on the stored entries of the explicit Hessian."""
        return int(np.sum(np.diff(self.X.indptr) ** 2)) * self.K * self.K

    def _padded_columns(self):
        if not hasattr(self, "_cols"):
            nnz = np.diff(self.X.indptr)
            width = int(nnz.max(initial=0))
            cols = np.full((len(nnz), width), -1, dtype=np.int64)
            pos = np.arange(self.X.nnz) - np.repeat(self.X.indptr[:-1], nnz)
            cols[np.repeat(np.arange(len(nnz)), nnz), pos] = self.X.indices
            self._cols = cols
        return self._cols

    def hessian(self, theta, diag_extra) -> sp.csc_matrix:
        """Class-major Hessian of the NLL plus ``diag_extra`` on the diagonal.

        Entry ``((k, j), (l, j'))`` sums ``n_i theta_ik (1[k=l] - theta_il)``
        over rows containing both columns; it is assembled in one COO pass
        over pairs of non-zeros per row.
        """
        K, n_cols = self.K, self.n_cols
        cols = self._padded_columns()
        W = self.n[:, None, None] * (np.einsum("ik,kl->ikl", theta, np.eye(K)) - theta[:, :, None] * theta[:, None, :])
        offs = np.arange(K) * n_cols
        rows_out, cols_out, data_out = [], [], []
        for a in range(cols.shape[1]):
            for b in range(cols.shape[1]):
                ok = (cols[:, a] >= 0) & (cols[:, b] >= 0)
                ca, cb = cols[ok, a], cols[ok, b]
                rows_out.append((offs[None, :, None] + ca[:, None, None]).repeat(K, axis=2).ravel())
                cols_out.append((offs[None, None, :] + cb[:, None, None]).repeat(K, axis=1).ravel())
                data_out.append(W[ok].ravel())
        size = K * n_cols
        H = sp.coo_matrix(
            (np.concatenate(data_out), (np.concatenate(rows_out), np.concatenate(cols_out))), shape=(size, size)
        ).tocsc()
        return (H + sp.diags(diag_extra)).tocsc()

    def hessian_blocks(self, theta, diag_extra) -> sp.csc_matrix:
        """Same matrix as :meth:`hessian`, built from ``K (K + 1) / 2`` products ``X' diag(w) X``.

        Cheaper than the pairwise pass when there are many rows and few classes.
        """
        K = self.K
        blocks = [[None] * K for _ in range(K)]
        for k in range(K):
            for l in range(k, K):
                w = self.n * theta[:, k] * ((k == l) - theta[:, l])
                blocks[k][l] = (self.XT @ self.X.multiply(w[:, None])).tocsc()
                if l != k:
                    blocks[l][k] = blocks[k][l].T
        return (sp.bmat(blocks, format="csc") + sp.diags(diag_extra)).tocsc()

    def hessp(self, theta, diag_extra, v):
        """Hessian-vector product without forming the Hessian."""
        V = _as_mat(v, self.n_cols, self.K)
        XV = np.asarray(self.X @ V)
        inner = self.n[:, None] * theta * (XV - np.sum(theta * XV, axis=1, keepdims=True))
        return _as_vec(np.asarray(self.XT @ inner)) + diag_extra * v

    def hessian_diagonal(self, theta, diag_extra):
        w = self.n[:, None] * theta * (1.0 - theta)
        return _as_vec(np.asarray(self.X.multiply(self.X).T @ w)) + diag_extra


def ridge_objective(design: DesignMatrix, B, tau: float, counts=None) -> tuple[float, np.ndarray]:
    """Penalized NLL and its gradient with respect to ``B``."""
    f, G, _ = _Problem(design, counts).ridge(np.asarray(B, dtype=float), tau)
    return f, G


def _newton_direction(prob: _Problem, theta, diag_extra, g) -> np.ndarray:
    """Solve the damped Newton system, explicitly or by preconditioned CG."""
    explicit = prob.hessian_entries <= HESSIAN_ENTRY_LIMIT
    if explicit or prob.K <= BLOCK_CLASS_LIMIT:
        H = prob.hessian(theta, diag_extra) if explicit else prob.hessian_blocks(theta, diag_extra)
        H = H + sp.identity(H.shape[0], format="csc") * _damping(H.diagonal())
        with np.errstate(all="ignore"):
            return -spsolve(H, g)
    diag = prob.hessian_diagonal(theta, diag_extra)
    damp = _damping(diag)
    n = len(g)
    op = LinearOperator((n, n), matvec=lambda v: prob.hessp(theta, diag_extra, v) + damp * v)
    pre = LinearOperator((n, n), matvec=lambda v: v / (diag + damp))
    d, _ = cg(op, -g, rtol=1e-10, atol=0.0, maxiter=10 * n, M=pre)
    return d


def _damping(H_diag: np.ndarray) -> float:
    return 1e-10 * (1.0 + float(np.max(H_diag, initial=0.0)))


def _as_vec(W):
    return W.ravel(order="F")


def _as_mat(v, n_cols, K):
    return v.reshape((K, n_cols)).T


def _marginal_only(design: DesignMatrix, counts=None):
    counts = design.counts if counts is None else counts
    total = counts.sum(axis=0)
    K = counts.shape[1]
    theta = total / total.sum() if total.sum() > 0 else np.full(K, 1.0 / K)
    return np.zeros((0, K)), theta


def fit_ridge(
    design: DesignMatrix,
    tau: float = 1.0,
    *,
    counts=None,
    W0=None,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> tuple[np.ndarray, FitReport]:
    """Damped Newton for the ridge-penalized multinomial fit.

    Returns ``(B, report)``.  Stops when the max-abs gradient is at most
    ``tol``; otherwise returns the best iterate with ``converged=False``.
    """
    if tau < 0:
        raise ConfigError("tau must be non-negative")
    counts = design.counts if counts is None else counts
    if design.U.shape[1] == 0:
        B, _ = _marginal_only(design, counts)
        return B, FitReport(0.0, 0, 0.0, True)
    prob = _Problem(design, counts)
    K, n_cols = prob.K, prob.n_cols
    W = np.zeros((n_cols, K)) if W0 is None else np.array(W0, dtype=float)
    if len(prob.n) == 0:
        return W, FitReport(0.0, 0, 0.0, True)
    pen_diag = np.tile(2.0 * tau * prob.pen, K)

    f, G, theta = prob.ridge(W, tau)
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = float(np.abs(G).max())
        if gnorm <= tol:
            return W, FitReport(f, it - 1, gnorm, True)
        g = _as_vec(G)
        d = _newton_direction(prob, theta, pen_diag, g)
        if not np.all(np.isfinite(d)) or g @ d >= 0:
            d = -g
        slope = g @ d
        step = 1.0
        accepted = False
        if -slope <= 1e-10 * (1.0 + abs(f)):
            # the predicted decrease is below the resolution of f; the Armijo
            # test is noise here, so judge the full step by the gradient instead
            attempts = 0
        else:
            attempts = 60
        for _ in range(attempts):
            W_try = W + step * _as_mat(d, n_cols, K)
            try:
                f_try, G_try, theta_try = prob.ridge(W_try, tau)
            except NumericalError:
                step *= 0.5
                continue
            if f_try <= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # near the optimum f stops resolving; accept the full step if it shrinks the gradient
            W_try = W + _as_mat(d, n_cols, K)
            f_try, G_try, theta_try = prob.ridge(W_try, tau)
            if np.abs(G_try).max() >= gnorm:
                return W, FitReport(f, it, gnorm, False)
        W, f, G, theta = W_try, f_try, G_try, theta_try
    gnorm = float(np.abs(G).max())
    return W, FitReport(f, it, gnorm, gnorm <= tol)


def _soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _lasso_optimality(W, G, lam):
    """Max violation of the subgradient conditions; ``lam`` is the per-entry ℓ1 weight."""
    nz = W != 0
    resid = np.where(nz, np.abs(G + lam * np.sign(W)), np.maximum(np.abs(G) - lam, 0.0))
    return float(resid.max())


def _cd_quadratic(H: sp.csc_matrix, g, z0, lam, max_sweeps=2000, tol=1e-12):
    """Coordinate descent for ``min_d g.d + d'Hd/2 + sum(lam |z0 + d|)``; returns ``z0 + d``."""
    z = z0.copy()
    q = g.copy()  # gradient of the quadratic model at the current z
    diag = H.diagonal()
    indptr, indices, data = H.indptr, H.indices, H.data
    order = np.flatnonzero(diag > 0)
    for _ in range(max_sweeps):
        biggest = 0.0
        for i in order:
            a = diag[i]
            u = z[i] - q[i] / a
            li = lam[i] / a
            new = u - li if u > li else (u + li if u < -li else 0.0)
            delta = new - z[i]
            if delta != 0.0:
                z[i] = new
                lo, hi = indptr[i], indptr[i + 1]
                q[indices[lo:hi]] += data[lo:hi] * delta
                if abs(delta) > biggest:
                    biggest = abs(delta)
        if biggest <= tol * (1.0 + np.abs(z).max()):
            break
    return z


def fit_lasso(
    design: DesignMatrix,
    tau: float = 1.0,
    *,
    counts=None,
    tol: float = LASSO_TOL,
    max_iter: int = MAX_ITER,
) -> tuple[np.ndarray, FitReport]:
    """Proximal Newton with a coordinate-descent inner solver for the ℓ1 fit.

    Convergence is declared when the subgradient optimality residual is at
    most ``tol``.
    """
    if tau < 0:
        raise ConfigError("tau must be non-negative")
    if tau == 0:
        return fit_ridge(design, 0.0, counts=counts, tol=min(tol, GRAD_TOL), max_iter=max_iter)
    counts = design.counts if counts is None else counts
    if design.U.shape[1] == 0:
        B, _ = _marginal_only(design, counts)
        return B, FitReport(0.0, 0, 0.0, True)
    prob = _Problem(design, counts)
    K, n_cols = prob.K, prob.n_cols
    W = np.zeros((n_cols, K))
    if len(prob.n) == 0:
        return W, FitReport(0.0, 0, 0.0, True)
    # intercept columns are left unpenalized by the ℓ1 term but keep a tiny ridge
    lam_mat = np.where(prob.pen[:, None] == 1.0, tau, 0.0) * np.ones((1, K))
    small = np.where(prob.pen == 1.0, 0.0, INTERCEPT_PENALTY * tau)

    def composite(Wm):
        f, G, theta = prob.ridge(Wm, 0.0)
        f += float(np.sum(lam_mat * np.abs(Wm))) + float(np.sum(small[:, None] * Wm * Wm))
        G = G + 2.0 * small[:, None] * Wm
        return f, G, theta

    lam = _as_vec(lam_mat)
    F, G, theta = composite(W)
    it = 0
    for it in range(1, max_iter + 1):
        viol = _lasso_optimality(W, G, lam_mat)
        if viol <= tol:
            return W, FitReport(F, it - 1, viol, True)
        H = prob.hessian(theta, np.tile(2.0 * small, K))
        H = H + sp.identity(H.shape[0], format="csc") * _damping(H.diagonal())
        w = _as_vec(W)
        z = _cd_quadratic(H.tocsc(), _as_vec(G), w, lam)
        d = z - w
        pred = _as_vec(G) @ d + np.sum(lam * (np.abs(z) - np.abs(w)))
        if pred >= 0:
            return W, FitReport(F, it, viol, False)
        step = 1.0
        for _ in range(60):
            W_try = W + step * _as_mat(d, n_cols, K)
            F_try, G_try, theta_try = composite(W_try)
            if F_try <= F + 1e-4 * step * pred:
                break
            step *= 0.5
        else:
            W_try = W + _as_mat(d, n_cols, K)
            F_try, G_try, theta_try = composite(W_try)
            if _lasso_optimality(W_try, G_try, lam_mat) >= viol:
                return W, FitReport(F, it, viol, False)
        W, F, G, theta = W_try, F_try, G_try, theta_try
    viol = _lasso_optimality(W, G, lam_mat)
    return W, FitReport(F, it, viol, viol <= tol)


def split_counts(counts: np.ndarray, n_folds: int, rng) -> list[np.ndarray]:
    """Randomly deal individual observations behind ``counts`` into folds."""
    counts = np.rint(np.asarray(counts)).astype(np.int64)
    flat = np.repeat(np.arange(counts.size), counts.ravel())
    flat = flat[rng.permutation(len(flat))]
    folds = []
    for f in range(n_folds):
        part = np.bincount(flat[f::n_folds], minlength=counts.size)
        folds.append(part.reshape(counts.shape).astype(float))
    return folds


def heldout_log_loss(theta: np.ndarray, counts: np.ndarray) -> float:
    """Summed ``-log theta`` over the observations in ``counts``."""
    mask = counts > 0
    return float(-np.sum(counts[mask] * np.log(np.maximum(theta[mask], 1e-300))))


def fit_ridge_cv(
    design: DesignMatrix,
    grid=INTERVAL_GRID,
    n_folds: int = 5,
    seed=0,
    *,
    return_losses: bool = False,
):
    """Pick ``tau`` from ``grid`` by held-out log loss, then refit on all counts.

    Returns ``(B, tau)`` (plus the per-grid mean losses when
    ``return_losses``).  Ties go to the larger ``tau``.  With fewer than
    ``2 * n_folds`` observations the fit falls back to ``tau = 1``.
    """
    counts = design.counts
    grid = np.asarray(sorted(set(float(t) for t in grid)), dtype=float)
    if np.any(grid < 0):
        raise ConfigError("grid values must be non-negative")
    total = counts.sum()
    if len(grid) == 1 or total < 2 * n_folds or design.U.shape[1] == 0:
        tau = float(grid[0]) if len(grid) == 1 else 1.0
        B, _ = fit_ridge(design, tau)
        return (B, tau, None) if return_losses else (B, tau)
    rng = np.random.default_rng(seed)
    folds = split_counts(counts, n_folds, rng)
    losses = np.zeros(len(grid))
    for test in folds:
        train = counts - test
        W = None
        for g in range(len(grid) - 1, -1, -1):  # large to small tau, warm-started
            W, _ = fit_ridge(design, grid[g], counts=train, W0=W)
            theta = predict_cpt(W, design)
            losses[g] += heldout_log_loss(theta, test)
    losses /= total
    best = np.flatnonzero(losses <= losses.min() + 1e-12 * max(1.0, abs(losses.min())))[-1]
    tau = float(grid[best])
    B, _ = fit_ridge(design, tau)
    return (B, tau, losses) if return_losses else (B, tau)
