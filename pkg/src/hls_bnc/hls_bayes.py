"""Fully Bayesian HLS: Gibbs sampling under a global-local shrinkage prior.

Coefficients follow ``beta_jk ~ N(0, lambda_j^2 tau^2)``.  The multinomial
likelihood is handled one class column at a time: conditional on the other
columns, class ``k`` is a binomial logistic model with offset
``log sum_{l != k} exp(eta_l)``, which Polya-Gamma augmentation turns into a
Gaussian update.  That update is drawn through the tree-structured Cholesky
factor of ``U' Omega U + diag(1 / (lambda^2 tau^2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import softmax

from .cpt_tree import INTERCEPT, DesignMatrix
from .exceptions import ConfigError, NumericalError
from .mcmc import effective_sample_size
from .polya_gamma import sample_pg
from .treechol import tree_cholesky

PRIORS = ("ridge", "horseshoe")
SCALE_PRIORS = ("half_cauchy", "inverse_gamma")


@dataclass(frozen=True)
class GlsConfig:
    """Shrinkage hierarchy and chain settings.

    ``tau_prior`` and ``lambda_prior`` are ``"half_cauchy"`` (on the scale)
    or ``"inverse_gamma"`` with parameters ``(ig_a, ig_b)``, placed on the
    squared scale unless ``ig_on_scale`` is set, in which case the
    inverse-gamma prior is on ``tau`` itself and ``tau`` is slice-sampled.
    """

    prior: str = "ridge"
    tau_prior: str = "inverse_gamma"
    lambda_prior: str = "half_cauchy"
    ig_a: float = 0.5
    ig_b: float = 0.5
    ig_on_scale: bool = False
    burn_in: int = 100
    n_samples: int = 400
    thin: int = 1
    seed: int | None = None
    pg_terms: int = 2
    intercept_sd: float = 10.0
    fixed_tau: float | None = None

    def __post_init__(self):
        if self.prior not in PRIORS:
            raise ConfigError(f"prior must be one of {PRIORS}")
        if self.tau_prior not in SCALE_PRIORS or self.lambda_prior not in SCALE_PRIORS:
            raise ConfigError(f"scale priors must be one of {SCALE_PRIORS}")
        if self.n_samples < 1 or self.burn_in < 0 or self.thin < 1:
            raise ConfigError("need n_samples >= 1, burn_in >= 0, thin >= 1")
        if self.ig_a <= 0 or self.ig_b <= 0:
            raise ConfigError("inverse-gamma parameters must be positive")
        if self.pg_terms < 1:
            raise ConfigError("pg_terms must be >= 1")


#: Named configurations used by the classifier and CLI.
PRESETS = {
    "ridge-ig": dict(prior="ridge", tau_prior="inverse_gamma"),
    "ridge-hc": dict(prior="ridge", tau_prior="half_cauchy"),
    "hs": dict(prior="horseshoe", tau_prior="half_cauchy", lambda_prior="half_cauchy"),
    "hs-ig": dict(prior="horseshoe", tau_prior="inverse_gamma", lambda_prior="inverse_gamma"),
}


def preset(name: str, **overrides) -> GlsConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown Bayesian preset {name!r}; choose from {sorted(PRESETS)}") from None
    return GlsConfig(**{**base, **overrides})


@dataclass
class ShrinkageState:
    B: np.ndarray
    omega: np.ndarray
    lam2: np.ndarray
    tau2: float
    xi: float = 1.0
    nu: np.ndarray | None = None

    @property
    def tau(self) -> float:
        return math.sqrt(self.tau2)

    def copy(self) -> "ShrinkageState":
        return replace(
            self,
            B=self.B.copy(),
            omega=self.omega.copy(),
            lam2=self.lam2.copy(),
            nu=None if self.nu is None else self.nu.copy(),
        )


def initial_state(design: DesignMatrix, K: int, config: GlsConfig) -> ShrinkageState:
    n_cols = design.U.shape[1]
    n_active = int(np.count_nonzero(design.counts.sum(axis=1) > 0)) if design.counts is not None else 0
    tau2 = 1.0 if config.fixed_tau is None else config.fixed_tau**2
    return ShrinkageState(
        B=np.zeros((n_cols, K)),
        omega=np.full((n_active, K), 0.25),
        lam2=np.ones(n_cols),
        tau2=tau2,
        xi=1.0,
        nu=np.ones(n_cols),
    )


def _inv_gamma(shape, scale, rng):
    # one gamma variate per element of the broadcast shape/scale
    shape, scale = np.broadcast_arrays(np.asarray(shape, dtype=float), np.asarray(scale, dtype=float))
    out = scale / rng.standard_gamma(shape)
    return out if out.ndim else float(out)


class _Sweeper:
    """Per-design constants reused across sweeps."""

    def __init__(self, design: DesignMatrix, counts: np.ndarray):
        totals = counts.sum(axis=1)
        active = totals > 0
        self.X = design.U[active].tocsr()
        self.XT = self.X.T.tocsr()
        self.Y = counts[active]
        self.n = totals[active]
        self.levels = design.levels
        self.shrunk = design.columns != INTERCEPT
        self.n_cols = design.U.shape[1]
        self.K = counts.shape[1]


def _draw_column(sw: _Sweeper, state, k, prior_prec, config, rng):
    eta = np.asarray(sw.X @ state.B)
    others = np.delete(eta, k, axis=1)
    if others.shape[1]:
        top = others.max(axis=1)
        offset = top + np.log(np.exp(others - top[:, None]).sum(axis=1))
    else:
        offset = np.zeros(len(eta))
    if len(sw.n):
        omega = sample_pg(sw.n, eta[:, k] - offset, config.pg_terms, rng)
        state.omega[:, k] = omega
        kappa = sw.Y[:, k] - sw.n / 2.0
        weight = np.asarray(sw.XT @ omega).ravel()
        rhs = np.asarray(sw.XT @ (kappa + omega * offset)).ravel()
    else:
        weight = np.zeros(sw.n_cols)
        rhs = np.zeros(sw.n_cols)
    jitter = 0.0
    for attempt in range(4):
        try:
            factor = tree_cholesky(sw.levels, weight, prior_prec + jitter)
            break
        except NumericalError:
            if attempt == 3:
                raise
            jitter = 1e-8 * float(np.sum(weight + prior_prec)) / max(sw.n_cols, 1) * 10.0**attempt
    state.B[:, k] = factor.sample(rhs, rng)


def _draw_scales(sw: _Sweeper, state: ShrinkageState, config: GlsConfig, rng):
    shrunk = sw.shrunk
    S = np.sum(state.B[shrunk] ** 2, axis=1)
    K = sw.K
    if config.prior == "horseshoe" and np.any(shrunk):
        if config.lambda_prior == "half_cauchy":
            lam2 = _inv_gamma((K + 1) / 2.0, 1.0 / state.nu[shrunk] + S / (2.0 * state.tau2), rng)
            state.lam2[shrunk] = lam2
            state.nu[shrunk] = _inv_gamma(1.0, 1.0 + 1.0 / lam2, rng)
        else:
            state.lam2[shrunk] = _inv_gamma(config.ig_a + K / 2.0, config.ig_b + S / (2.0 * state.tau2), rng)
    if config.fixed_tau is not None:
        return
    M = int(np.count_nonzero(shrunk)) * K
    R = float(np.sum(S / state.lam2[shrunk]))
    if config.tau_prior == "half_cauchy":
        state.tau2 = float(_inv_gamma((M + 1) / 2.0, 1.0 / state.xi + R / 2.0, rng))
        state.xi = float(_inv_gamma(1.0, 1.0 + 1.0 / state.tau2, rng))
    elif not config.ig_on_scale:
        state.tau2 = float(_inv_gamma(config.ig_a + M / 2.0, config.ig_b + R / 2.0, rng))
    else:
        a, b = config.ig_a, config.ig_b

        def logp(u):  # u = log tau, density includes the Jacobian
            return -(a + M) * u - b * math.exp(-u) - R * math.exp(-2.0 * u) / 2.0

        state.tau2 = math.exp(2.0 * _slice(logp, 0.5 * math.log(state.tau2), rng))


def _slice(logp, x0, rng, width=1.0, max_steps=100):
    """One univariate slice-sampling update with stepping out."""
    level = logp(x0) + math.log(rng.uniform())
    left = x0 - width * rng.uniform()
    right = left + width
    for _ in range(max_steps):
        if logp(left) < level:
            break
        left -= width
    for _ in range(max_steps):
        if logp(right) < level:
            break
        right += width
    while True:
        x1 = rng.uniform(left, right)
        if logp(x1) >= level:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1


def gibbs_sweep(
    state: ShrinkageState,
    design: DesignMatrix,
    counts: np.ndarray | None,
    config: GlsConfig,
    rng,
    _sweeper: _Sweeper | None = None,
) -> ShrinkageState:
    """One full conditional sweep; updates ``state`` in place and returns it.

    Order: for each class column, PG auxiliaries then the Gaussian draw of
    that column; then local scales (horseshoe); then the global scale.
    """
    counts = design.counts if counts is None else np.asarray(counts, dtype=float)
    sw = _sweeper or _Sweeper(design, counts)
    prior_var = np.where(sw.shrunk, state.lam2 * state.tau2, config.intercept_sd**2)
    prior_prec = 1.0 / prior_var
    for k in range(sw.K):
        _draw_column(sw, state, k, prior_prec, config, rng)
    _draw_scales(sw, state, config, rng)
    return state


@dataclass
class ChainDiagnostics:
    tau_trace: np.ndarray
    frob_trace: np.ndarray
    ess_tau: float
    ess_B: np.ndarray
    sweeps: int
    draws: np.ndarray | None = field(default=None, repr=False)

    @property
    def min_ess(self) -> float:
        vals = [self.ess_tau] + list(np.ravel(self.ess_B))
        return float(min(vals))

    def write_trace(self, path: str | Path) -> None:
        """Columnar text dump: ``iteration tau frobenius_norm``."""
        rows = np.column_stack([np.arange(len(self.tau_trace)), self.tau_trace, self.frob_trace])
        np.savetxt(path, rows, fmt=["%d", "%.10g", "%.10g"], header="iteration tau frob_norm")


def fit_bayes(
    design: DesignMatrix,
    config: GlsConfig = GlsConfig(),
    rng=None,
    keep_draws: bool = False,
) -> tuple[np.ndarray, ChainDiagnostics]:
    """Posterior-mean CPT by averaging ``softmax(U B)`` over retained draws."""
    counts = design.counts
    K = counts.shape[1]
    rng = np.random.default_rng(config.seed if rng is None else rng)
    L = design.U.shape[0]
    if design.U.shape[1] == 0:
        total = counts.sum(axis=0)
        theta = np.tile(total / total.sum() if total.sum() > 0 else np.full(K, 1.0 / K), (L, 1))
        empty = np.empty(0)
        return theta, ChainDiagnostics(empty, empty, 0.0, np.empty((0, K)), 0)

    state = initial_state(design, K, config)
    sw = _Sweeper(design, counts)
    theta_sum = np.zeros((L, K))
    n_keep = config.n_samples
    taus = np.empty(n_keep)
    frob = np.empty(n_keep)
    draws = np.empty((n_keep,) + state.B.shape)
    for _ in range(config.burn_in):
        gibbs_sweep(state, design, counts, config, rng, sw)
    for s in range(n_keep):
        for _ in range(config.thin):
            gibbs_sweep(state, design, counts, config, rng, sw)
        theta_sum += softmax(np.asarray(design.U @ state.B), axis=1)
        taus[s] = state.tau
        frob[s] = np.linalg.norm(state.B)
        draws[s] = state.B
    theta = theta_sum / n_keep
    theta /= theta.sum(axis=1, keepdims=True)
    ess_B = np.array([[effective_sample_size(draws[:, j, k]) for k in range(K)] for j in range(draws.shape[1])])
    diag = ChainDiagnostics(
        taus,
        frob,
        effective_sample_size(taus),
        ess_B,
        config.burn_in + n_keep * config.thin,
        draws if keep_draws else None,
    )
    return theta, diag
