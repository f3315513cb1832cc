"""Stochastic approximation EM with a CPF-AS E-step.

Each iteration draws weighted latent paths with one conditional sweep,
folds their sufficient statistics into decaying running averages, and
maximises the averaged complete-data log-likelihood in closed form.

All AR processes are scalar and independent, so the sufficient statistics of
a coordinate with order ``P`` are the weighted Gram matrix of
``u_t = (1, z_{t-1}, ..., z_{t-P}, z_t)`` over ``t >= P``. The numerator and
denominator of every closed-form update are linear in that matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DegenerateWeightsError, InvalidConfigError, InvalidInputError, SingularUpdateError
from .graph import determine_graph, enforce_acyclicity, scad
from .model.layout import LatentLayout
from .model.likelihood import LOG_2PI, node_residuals, observation_loglik, path_loglik
from .model.simulate import lag_contributions
from .model.types import SCENARIOS, CausalGraph, LatentTrajectory, SemParameters, TimeSeriesDataset
from .smoother import ParticleSystem, SweepBlock, run_sweep

logger = logging.getLogger(__name__)

AR_CLAMP = 0.999


@dataclass
class FitConfig:
    """Settings of :func:`saem_fit`.

    ``K_burn`` iterations use step size one; afterwards the step decays as
    ``(k - K_burn) ** -kappa``. ``mask`` restricts the candidate instantaneous
    edges (``mask[i, j]`` allows ``x_j -> x_i``); by default every off-diagonal
    entry is a candidate. ``update_params=False`` keeps the initial parameters
    fixed and turns the fit into a pure smoothing run.

    ``blocking="node"`` runs one conditional sweep per node (its row of ``B``,
    its log-variance and its lagged coefficients) in a Gibbs scan, each
    conditioned on the current paths of the other nodes; ``"joint"`` sweeps
    the whole state at once, which mixes poorly beyond a few dozen latent
    coordinates.
    """

    M: int = 15
    K: int = 100
    K_burn: Optional[int] = None
    kappa: float = 0.7
    scenario: str = "coef-and-variance"
    p_lag: int = 1
    q_lag: int = 1
    s_lag: int = 1
    r_lag: int = 1
    scad_enabled: bool = False
    scad_lambda: float = 0.0
    scad_a: float = 3.7
    tol: Optional[float] = None
    seed: int = 0
    n_average: int = 10
    threshold: float = 0.05
    mask: Optional[np.ndarray] = None
    gs_passes: int = 1
    update_params: bool = True
    var_floor: float = 1e-10
    blocking: str = "node"

    def __post_init__(self):
        if self.K_burn is None:
            self.K_burn = self.K // 2
        self.validate()

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise InvalidConfigError(f"unknown scenario {self.scenario!r}")
        if self.M < 2:
            raise InvalidConfigError("need at least two particles")
        if self.K < 1:
            raise InvalidConfigError("need at least one iteration")
        if not 0.5 < self.kappa <= 1.0:
            raise InvalidConfigError("kappa must lie in (0.5, 1]")
        if self.K_burn < 0:
            raise InvalidConfigError("K_burn must be nonnegative")
        if self.scad_a <= 2 or self.scad_lambda < 0:
            raise InvalidConfigError("SCAD needs a > 2 and lambda >= 0")
        if min(self.p_lag, self.q_lag, self.r_lag) < 1 or self.s_lag < 0:
            raise InvalidConfigError("AR orders must be at least 1")
        if self.n_average < 1 or self.gs_passes < 1:
            raise InvalidConfigError("n_average and gs_passes must be positive")
        if self.threshold <= 0:
            raise InvalidConfigError("threshold must be positive")
        if self.blocking not in ("node", "joint"):
            raise InvalidConfigError(f"unknown blocking {self.blocking!r}")

    @property
    def scad_penalty(self):
        if self.scad_enabled and self.scad_lambda > 0:
            return (self.scad_lambda, self.scad_a)
        return None

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if self.mask is not None:
            out["mask"] = np.asarray(self.mask).astype(int).tolist()
        return out


def step_size(k: int, config: FitConfig) -> float:
    """Stochastic approximation step ``lambda_k``."""
    if k < 1:
        raise ValueError("iterations are counted from 1")
    if k <= config.K_burn:
        return 1.0
    return float((k - config.K_burn) ** (-config.kappa))


# -- sufficient statistics -------------------------------------------------

@dataclass
class SufficientStats:
    """Running averages of per-path sufficient statistics.

    ``gram[name]`` has shape (n_coords, P + 2, P + 2); for coordinate ``k``
    and lag ``p`` the pair ``(gram[k, P+1, p], gram[k, p, p])`` is the
    numerator/denominator pair of the AR coefficient update before the
    other terms are subtracted. ``resid_sq`` and ``resid_count`` (per node)
    feed the fixed noise-variance update, ``init_c`` and ``init_count`` (per
    lagged coordinate) the spread of the first lagged slices.
    """

    gram: dict
    resid_sq: np.ndarray
    resid_count: np.ndarray
    init_c: np.ndarray
    init_count: np.ndarray
    layout: LatentLayout = field(repr=False)
    k: int = 0

    def _combine(self, other, fa, fb):
        return SufficientStats(
            gram={n: fa * self.gram[n] + fb * other.gram[n] for n in self.gram},
            resid_sq=fa * self.resid_sq + fb * other.resid_sq,
            resid_count=fa * self.resid_count + fb * other.resid_count,
            init_c=fa * self.init_c + fb * other.init_c,
            init_count=fa * self.init_count + fb * other.init_count,
            layout=other.layout,
            k=self.k,
        )

    def blend(self, new: "SufficientStats", lam: float) -> "SufficientStats":
        """``(1 - lam) * self + lam * new``, advancing the iteration counter."""
        out = self._combine(new, 1.0 - lam, lam)
        out.k = self.k + 1
        return out

    def __add__(self, other: "SufficientStats") -> "SufficientStats":
        return self._combine(other, 1.0, 1.0)


def _ar_design(paths, order):
    """Stack ``u_t = (1, z_{t-1}, ..., z_{t-P}, z_t)`` -> (M, T-P, n, P+2)."""
    M, T, n = paths.shape
    cols = [np.ones((M, T - order, n))]
    cols += [paths[:, order - p: T - p] for p in range(1, order + 1)]
    cols.append(paths[:, order:])
    return np.stack(cols, axis=-1)


def _weighted_gram(z, w, order):
    """Per-coordinate weighted Gram matrices of the AR design, (n, P+2, P+2)."""
    U = _ar_design(z, order)
    n = U.shape[2]
    A = np.moveaxis(U, 2, 0).reshape(n, -1, order + 2)
    wt = np.repeat(w, U.shape[1])[None, :, None]
    return np.swapaxes(A * wt, 1, 2) @ A


def path_statistics(layout: LatentLayout, X, paths, weights, coords=None, nodes=None) -> SufficientStats:
    """Weighted sufficient statistics of a set of full latent paths.

    Parameters
    ----------
    paths : (M, T, d) array
    weights : (M,) normalised weights
    coords, nodes : optional
        Restrict the statistics to these coordinates (index array) and node
        equations (boolean mask); other entries are left at zero so that
        statistics of disjoint blocks can be summed.
    """
    paths = np.asarray(paths, dtype=float)
    w = np.asarray(weights, dtype=float)
    d, m = layout.d, layout.m
    in_block = np.ones(d, dtype=bool) if coords is None else np.isin(np.arange(d), coords)
    nodes = np.ones(m, dtype=bool) if nodes is None else np.asarray(nodes, dtype=bool)
    gram = {}
    for name, sl, order in layout.groups:
        n = sl.stop - sl.start
        g = np.zeros((n, order + 2, order + 2))
        local = np.flatnonzero(in_block[sl])
        if local.size:
            g[local] = _weighted_gram(paths[:, :, sl.start + local], w, order)
        gram[name] = g
    resid_sq = np.zeros(m)
    count = np.zeros(m)
    if not layout.has_h and nodes.any():
        r = node_residuals(layout, X, paths)
        resid_sq[nodes] = np.einsum("j,jti->i", w, r**2)[nodes]
        count[nodes] = X.shape[0] * w.sum()
    init_c = np.zeros(layout.n_c)
    init_count = np.zeros(layout.n_c)
    local = np.flatnonzero(in_block[layout.sl_c])
    if local.size:
        r_l = int(layout.order[layout.sl_c][0])
        cols = layout.sl_c.start + local
        dev = paths[:, :r_l, cols] - layout.init_mean[cols]
        init_c[local] = np.einsum("j,jtk->k", w, dev**2) / r_l
        init_count[local] = w.sum()
    return SufficientStats(gram, resid_sq, count, init_c, init_count, layout)


def update_q_statistics(stats: Optional[SufficientStats], particles: ParticleSystem, data, lambda_k: float):
    """Fold the weighted final-time paths of one full-state sweep into the running stats."""
    X = data.values if isinstance(data, TimeSeriesDataset) else np.asarray(data, dtype=float)
    new = path_statistics(particles.layout, X, particles.paths(), particles.weights[-1])
    if stats is None:
        new.k = 1
        return new
    return stats.blend(new, lambda_k)


# -- closed-form M-step ------------------------------------------------------

def _regularized(den):
    eps = 1e-8 * np.mean(den) if den.size else 0.0
    return den + eps


def _ar_coefficients(gram, a0, coefs, passes=1):
    """Gauss-Seidel sweep(s): each lag coefficient, then the intercept.

    Returns updated ``(a0, coefs, n_clamped)``.
    """
    a0 = np.array(a0, dtype=float)
    coefs = np.array(coefs, dtype=float)
    P = coefs.shape[0]
    cur = P + 1
    clamped = 0
    if gram.shape[0] == 0:
        return a0, coefs, 0
    for _ in range(passes):
        for p in range(1, P + 1):
            num = gram[:, cur, p] - a0 * gram[:, 0, p]
            for lag in range(1, P + 1):
                if lag != p:
                    num = num - coefs[lag - 1] * gram[:, lag, p]
            den = _regularized(gram[:, p, p])
            if np.any(~np.isfinite(den)) or np.any(den <= 0):
                raise SingularUpdateError(f"singular denominator for AR lag {p}")
            val = num / den
            clamped += int(np.sum(np.abs(val) > AR_CLAMP))
            coefs[p - 1] = np.clip(val, -AR_CLAMP, AR_CLAMP)
        n = gram[:, 0, 0]
        if np.any(n <= 0):
            raise SingularUpdateError("no effective samples for the intercept update")
        a0 = (gram[:, cur, 0] - np.einsum("pk,kp->k", coefs, gram[:, 1:cur, 0])) / n
    return a0, coefs, clamped


def _ar_innovation_variance(gram, a0, coefs):
    """Weighted mean squared AR residual, ``c' G c / n`` with ``c = (-a0, -a, 1)``."""
    if gram.shape[0] == 0:
        return np.zeros(0)
    c = np.concatenate([-np.asarray(a0)[None], -np.asarray(coefs), np.ones((1, gram.shape[0]))], axis=0)
    quad = np.einsum("pk,kpq,qk->k", c, gram, c)
    return np.maximum(quad / gram[:, 0, 0], 0.0)


def _group_update(stats, name, params, passes):
    layout = stats.layout
    sl, order = next((s, o) for n, s, o in layout.groups if n == name)
    tmp = LatentLayout(params)
    a0, coefs, clamped = _ar_coefficients(stats.gram[name], tmp.intercept[sl], tmp.coefs[:order, sl], passes)
    var = _ar_innovation_variance(stats.gram[name], a0, coefs)
    return a0, coefs, var, clamped


def m_step_alpha(stats: SufficientStats, params: SemParameters, passes: int = 1):
    """Update of the coefficient-process intercepts and AR coefficients.

    Returns full-size ``(alpha0, alpha)`` arrays; entries outside the candidate
    mask keep their previous values.
    """
    a0, coefs, _, _ = _group_update(stats, "B", params, passes)
    new = LatentLayout(params).with_group_params("B", a0, coefs, LatentLayout(params).var[stats.layout.sl_b])
    return new.alpha0, new.alpha


def m_step_w(stats: SufficientStats, params: SemParameters):
    """Innovation variances of the coefficient processes at the current AR values."""
    lay = LatentLayout(params)
    sl, order = lay.sl_b, params.p_lag
    var = _ar_innovation_variance(stats.gram["B"], lay.intercept[sl], lay.coefs[:order, sl])
    return lay.with_group_params("B", lay.intercept[sl], lay.coefs[:order, sl], var).w


def m_step_beta_v(stats: SufficientStats, params: SemParameters, passes: int = 1):
    """``(beta0, beta, v)`` for the log-variance processes."""
    if "h" not in stats.gram:
        return params.beta0.copy(), params.beta.copy(), params.v.copy()
    a0, coefs, var, _ = _group_update(stats, "h", params, passes)
    return a0, coefs, var


def m_step_R(stats: SufficientStats):
    """Constant noise variances: diagonal of the averaged residual outer products."""
    count = np.where(stats.resid_count > 0, stats.resid_count, 1.0)
    return np.where(stats.resid_count > 0, stats.resid_sq / count, 0.0)


def m_step_gamma_u(stats: SufficientStats, params: SemParameters, passes: int = 1):
    """``(gamma0, gamma, u, u_c)`` for the lagged coefficient processes.

    ``u_c`` is the spread of the first ``r_lag`` slices around the initial mean,
    per candidate lagged coordinate. With no lags every group is empty.
    """
    if params.s_lag == 0 or "C" not in stats.gram:
        m = params.m
        return np.zeros((0, m, m)), np.zeros((0, 1, m, m)), np.zeros((0, m, m)), np.zeros(0)
    a0, coefs, var, _ = _group_update(stats, "C", params, passes)
    new = LatentLayout(params).with_group_params("C", a0, coefs, var)
    return new.gamma0, new.gamma, new.u, _initial_spread(stats)


def _initial_spread(stats):
    count = np.where(stats.init_count > 0, stats.init_count, 1.0)
    return np.where(stats.init_count > 0, stats.init_c / count, 0.0)


def m_step(stats: SufficientStats, params: SemParameters, passes: int = 1, var_floor: float = 0.0):
    """Apply every applicable update; returns ``(params, diagnostics)``."""
    diag = {"clamped": 0}
    lay = LatentLayout(params)
    for name, sl, order in lay.groups:
        a0, coefs, var, clamped = _group_update(stats, name, params, passes)
        diag["clamped"] += clamped
        params = LatentLayout(params).with_group_params(name, a0, coefs, np.maximum(var, var_floor))
    if not params.varying_variance:
        sigma2 = m_step_R(stats)
        params = params.copy(sigma2_fixed=np.maximum(sigma2, max(var_floor, 1e-12)))
    if params.s_lag:
        diag["u_c"] = _initial_spread(stats).tolist()
    return params, diag


# -- likelihood summaries ------------------------------------------------

def complete_data_loglik(layout: LatentLayout, X, paths, weights) -> float:
    """Weighted ``log p(X, Z)`` over paths under the layout's parameters."""
    paths = np.asarray(paths, dtype=float)
    w = np.asarray(weights, dtype=float)
    obs = path_loglik(layout, X, paths).sum(axis=1)
    total = obs.copy()
    var = np.maximum(layout.var, 1e-300)
    for name, sl, order in layout.groups:
        z = paths[:, :, sl]
        U = _ar_design(z, order)
        mean = layout.intercept[sl] + np.einsum("jtkp,pk->jtk", U[..., 1:order + 1], layout.coefs[:order, sl])
        resid = z[:, order:] - mean
        total += np.sum(-0.5 * (LOG_2PI + np.log(var[sl]) + resid**2 / var[sl]), axis=(1, 2))
        iv = layout.init_var[sl]
        dev = z[:, :order] - layout.init_mean[sl]
        total += np.sum(-0.5 * (LOG_2PI + np.log(iv) + dev**2 / iv), axis=(1, 2))
    return float(np.dot(w, total))


def penalized_loglik(data, latents: LatentTrajectory, lam: float, a: float = 3.7) -> float:
    """Observation log-likelihood minus SCAD penalties on ``b_t`` and ``b_t - b_{t-1}``."""
    X = data.values if isinstance(data, TimeSeriesDataset) else np.asarray(data, dtype=float)
    if lam < 0 or a <= 2:
        raise InvalidInputError("need lambda >= 0 and a > 2")
    lagc = lag_contributions(latents.C, X)
    ll = sum(observation_loglik(X[t], latents.B[t], latents.h[t], lagc[t]) for t in range(X.shape[0]))
    if lam == 0:
        return float(ll)
    B = latents.B
    pen = scad(B, lam, a).sum() + scad(np.diff(B, axis=0), lam, a).sum()
    return float(ll - pen)


# -- driver -----------------------------------------------------------------

@dataclass
class FitResult:
    """Estimated parameters, posterior summaries and diagnostics of a fit.

    Posterior arrays follow the latent layouts: ``b_mean``/``b_var`` are
    (T, m, m), ``h_mean``/``h_var`` (T, m), ``c_mean``/``c_var`` (s, T, m, m).
    ``final_windows`` (n, L, d) and ``final_weights`` (n,) hold pooled lag
    windows at the last time step, resampled from the weighted particles of
    the last iterations; they seed forecasting. ``system`` is the particle
    system of the last sweep.
    """

    params: SemParameters
    system: ParticleSystem
    b_mean: np.ndarray
    b_var: np.ndarray
    h_mean: np.ndarray
    h_var: np.ndarray
    c_mean: np.ndarray
    c_var: np.ndarray
    q_trace: np.ndarray
    graph: CausalGraph
    raw_graph: CausalGraph
    final_windows: np.ndarray
    final_weights: np.ndarray
    diagnostics: dict
    config: FitConfig
    reference: np.ndarray = field(repr=False, default=None)

    @property
    def layout(self) -> LatentLayout:
        return LatentLayout(self.params)

    @property
    def T(self) -> int:
        return self.b_mean.shape[0]


def initial_parameters(data: TimeSeriesDataset, config: FitConfig) -> SemParameters:
    """Starting values: AR 0.9 split over lags, innovation variance 0.05.

    Fixed noise variances start at the per-variable sample variance; latent
    log-variances start with a prior mean at the log sample variance.
    """
    X = data.values
    m = X.shape[1]
    sample_var = np.maximum(X.var(axis=0), 1e-8)
    varying = config.scenario != "coef-only"
    s_lag = config.s_lag if config.scenario == "with-lags" else 0
    beta_ar = 0.9
    return SemParameters.create(
        m,
        p_lag=config.p_lag,
        q_lag=config.q_lag,
        s_lag=s_lag,
        r_lag=config.r_lag,
        sigma2_fixed=None if varying else sample_var,
        mask=config.mask,
        beta0=(1.0 - beta_ar) * np.log(sample_var) if varying else None,
        beta_ar=beta_ar,
    )


def _param_vector(params: SemParameters) -> np.ndarray:
    parts = [params.alpha0, params.alpha, params.w, params.beta0, params.beta, params.v,
             params.gamma0, params.gamma, params.u]
    if params.sigma2_fixed is not None:
        parts.append(params.sigma2_fixed)
    return np.concatenate([np.ravel(p) for p in parts])


def _sweep_blocks(layout: LatentLayout, blocking: str):
    if blocking == "joint":
        return [(np.arange(layout.d), np.ones(layout.m, dtype=bool))]
    out = []
    for node, idx in layout.node_blocks():
        nodes = np.zeros(layout.m, dtype=bool)
        nodes[node] = True
        out.append((idx, nodes))
    return out


def _final_windows(paths, w, L, rng):
    """Resample lag windows ending at the last time step, (M, L, n)."""
    M, T, _ = paths.shape
    sel = _pick_many(w, M, rng)
    return paths[sel][:, T - 1 - np.arange(min(L, T))]


def _pick_many(w, n, rng):
    cdf = np.cumsum(w)
    return np.minimum(np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right"), len(w) - 1)


def saem_fit(data: TimeSeriesDataset, config: FitConfig, rng=None, init_params: Optional[SemParameters] = None,
             callback=None) -> FitResult:
    """Estimate the time-varying causal model.

    Parameters
    ----------
    data : TimeSeriesDataset
    config : FitConfig
    rng : numpy Generator, optional
        Defaults to ``default_rng(config.seed)``.
    init_params : SemParameters, optional
        Starting parameters; :func:`initial_parameters` otherwise.
    callback : callable, optional
        Called as ``callback(k, params, stats)`` after every iteration.

    Notes
    -----
    The first reference comes from unconditional bootstrap filters. Posterior
    summaries average the weighted final-time paths of the last
    ``config.n_average`` iterations; the Q-trace holds the complete-data
    log-likelihood of the current reference path under the updated
    parameters.
    """
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    X = data.values
    T, m = X.shape
    params = init_params if init_params is not None else initial_parameters(data, config)
    if params.m != m:
        raise InvalidInputError("parameter dimension differs from the data")
    if T < params.max_order + 2:
        raise InvalidInputError(f"need at least {params.max_order + 2} time steps, got {T}")

    layout = LatentLayout(params)
    blocks = _sweep_blocks(layout, config.blocking)
    pen = config.scad_penalty
    ref = np.repeat(layout.init_mean[None], T, axis=0)
    for idx, nodes in blocks:
        if idx.size:
            blk = SweepBlock(idx, nodes, ref.copy())
            ref[:, idx] = run_sweep(layout, X, None, config.M, rng, pen, block=blk)[1]

    stats = None
    q_trace = []
    diag = {"ancestor_fallbacks": 0, "clamped": 0, "low_ess_steps": 0, "iterations": 0, "u_c": None}
    n_avg = min(config.n_average, config.K)
    mean_acc = np.zeros((T, layout.d))
    sq_acc = np.zeros((T, layout.d))
    win_pool = []
    n_acc = 0
    system = None
    prev_vec = _param_vector(params)

    for k in range(1, config.K + 1):
        new_stats = None
        averaging = k > config.K - n_avg
        windows = np.zeros((config.M, layout.L, layout.d)) if averaging else None
        for idx, nodes in blocks:
            if idx.size == 0:
                part = path_statistics(layout, X, ref[None], np.ones(1), coords=idx, nodes=nodes)
                new_stats = part if new_stats is None else new_stats + part
                continue
            try:
                system, new_ref, fb = run_sweep(layout, X, ref[:, idx], config.M, rng, pen,
                                                block=SweepBlock(idx, nodes, ref))
            except DegenerateWeightsError as err:
                err.iteration = k
                err.args = (f"{err.args[0]} (iteration {k})",)
                raise
            diag["ancestor_fallbacks"] += fb
            W = system.weights
            diag["low_ess_steps"] += int(np.sum(1.0 / np.sum(W**2, axis=1) < 1.5))
            paths = system.paths()
            w_T = W[-1]
            full = np.repeat(ref[None], config.M, axis=0)
            full[:, :, idx] = paths
            part = path_statistics(layout, X, full, w_T, coords=idx, nodes=nodes)
            new_stats = part if new_stats is None else new_stats + part
            ref[:, idx] = new_ref
            if averaging:
                mean_acc[:, idx] += np.einsum("j,jtd->td", w_T, paths)
                sq_acc[:, idx] += np.einsum("j,jtd->td", w_T, paths**2)
                windows[:, :, idx] = _final_windows(paths, w_T, layout.L, rng)
        if averaging:
            win_pool.append(windows)
            n_acc += 1

        lam = step_size(k, config)
        if stats is None:
            stats = new_stats
            stats.k = 1
        else:
            stats = stats.blend(new_stats, lam)

        if config.update_params:
            try:
                params, step_diag = m_step(stats, params, config.gs_passes, config.var_floor)
            except SingularUpdateError as err:
                raise SingularUpdateError(f"{err} (iteration {k})") from err
            diag["clamped"] += step_diag["clamped"]
            diag["u_c"] = step_diag.get("u_c")
            layout = LatentLayout(params)
        q_trace.append(complete_data_loglik(layout, X, ref[None], np.ones(1)))
        if callback is not None:
            callback(k, params, stats)
        diag["iterations"] = k

        vec = _param_vector(params)
        if config.tol is not None and k > config.K_burn and np.max(np.abs(vec - prev_vec)) < config.tol:
            logger.info("converged after %d iterations", k)
            if n_acc == 0:
                mean_acc += ref
                sq_acc += ref**2
                win_pool.append(np.repeat(ref[T - 1 - np.arange(min(layout.L, T))][None], config.M, axis=0))
                n_acc = 1
            break
        prev_vec = vec

    mean = mean_acc / n_acc
    var = np.maximum(sq_acc / n_acc - mean**2, 0.0)
    traj_mean = layout.to_trajectory(mean)
    traj_var = layout.to_trajectory(var)
    h_var = traj_var.h if layout.has_h else np.zeros_like(traj_var.h)
    raw = determine_graph(traj_mean.B, config.threshold, lagged_mean=traj_mean.C)
    graph = enforce_acyclicity(raw)
    final_windows = np.concatenate(win_pool, axis=0)
    diag["removed_edges"] = getattr(graph, "removed_edges", [])
    return FitResult(
        params=params,
        system=system,
        b_mean=traj_mean.B,
        b_var=traj_var.B,
        h_mean=traj_mean.h,
        h_var=h_var,
        c_mean=traj_mean.C,
        c_var=traj_var.C,
        q_trace=np.asarray(q_trace),
        graph=graph,
        raw_graph=raw,
        final_windows=final_windows,
        final_weights=np.full(final_windows.shape[0], 1.0 / final_windows.shape[0]),
        diagnostics=diag,
        config=config,
        reference=ref,
    )
