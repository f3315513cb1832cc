"""Synthetic data: latent AR processes, observations and benchmark instances."""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidModelError
from .layout import LatentLayout
from .types import (
    CausalGraph,
    GeneratorConfig,
    LatentTrajectory,
    SemParameters,
    TimeSeriesDataset,
    topological_order,
)


def simulate_state_path(layout: LatentLayout, T: int, rng) -> np.ndarray:
    """Draw a (T, d) path of the flat latent state from the model prior."""
    Z = np.empty((T, layout.d))
    sd = np.sqrt(layout.var)
    init_sd = np.sqrt(layout.init_var)
    for t in range(T):
        act = layout.active(t)
        z = layout.init_mean + init_sd * rng.standard_normal(layout.d)
        if np.any(act):
            window = np.zeros((layout.L, layout.d))
            for lag in range(min(t, layout.L)):
                window[lag] = Z[t - 1 - lag]
            step = layout.ar_mean(window) + sd * rng.standard_normal(layout.d)
            z = np.where(act, step, z)
        Z[t] = z
    return Z


def simulate_latents(theta: SemParameters, T: int, rng) -> LatentTrajectory:
    """Simulate coefficient, log-variance and lagged-coefficient paths.

    The first ``order`` slices of every process are drawn from its initial
    prior (stationary moments unless overridden); later slices follow the AR
    recursion. Entries outside ``theta.mask`` stay exactly zero, and without
    latent variances ``h`` is the constant ``log(sigma2_fixed)``.
    """
    if T < theta.max_order:
        raise InvalidModelError(f"T={T} is shorter than the AR order {theta.max_order}")
    layout = LatentLayout(theta)
    Z = simulate_state_path(layout, T, rng)
    return layout.to_trajectory(Z)


def lag_contributions(C, X) -> np.ndarray:
    """``sum_s C_t^(s) X_{t-s}`` for every t, with zero padding before the start.

    ``C`` has shape (s_lag, T, m, m) and ``X`` shape (T, m).
    """
    X = np.asarray(X, dtype=float)
    T, m = X.shape
    out = np.zeros((T, m))
    for s in range(C.shape[0]):
        lagged = np.zeros_like(X)
        lagged[s + 1:] = X[: T - s - 1]
        out += np.einsum("tij,tj->ti", C[s], lagged)
    return out


def simulate_observations(latents: LatentTrajectory, theta: SemParameters, rng, noise=None,
                          names=None) -> TimeSeriesDataset:
    """Generate ``X_t = (I - B_t)^{-1} (sum_s C_t^(s) X_{t-s} + E_t)``.

    Parameters
    ----------
    noise : (T, m) array, optional
        Pre-drawn innovations ``E``. When omitted, ``e_it ~ N(0, exp(h_it))``.
    """
    B, h, C = latents.B, latents.h, latents.C
    T, m = h.shape
    pattern = np.any(B != 0, axis=0).T
    np.fill_diagonal(pattern, False)
    if np.any(np.diagonal(B, axis1=1, axis2=2) != 0):
        raise InvalidModelError("B_t must have a zero diagonal")
    order = topological_order(pattern)
    if order is None:
        raise InvalidModelError("instantaneous coefficient pattern contains a cycle")
    if noise is None:
        noise = np.exp(0.5 * h) * rng.standard_normal((T, m))
    E = np.asarray(noise, dtype=float).reshape(T, m)

    X = np.zeros((T, m))
    if C.shape[0] == 0:
        for i in order:
            X[:, i] = E[:, i] + np.einsum("tj,tj->t", B[:, i, :], X)
    else:
        for t in range(T):
            lag = np.zeros(m)
            for s in range(C.shape[0]):
                if t - s - 1 >= 0:
                    lag += C[s, t] @ X[t - s - 1]
            x = np.zeros(m)
            for i in order:
                x[i] = E[t, i] + lag[i] + B[t, i] @ x
            X[t] = x
    return TimeSeriesDataset(X, names)


def _random_dag(m, p, rng):
    perm = rng.permutation(m)
    adj = np.zeros((m, m), dtype=int)
    for a in range(m):
        for b in range(a + 1, m):
            if rng.random() < p:
                adj[perm[a], perm[b]] = 1
    return adj


def generate_benchmark_instance(config: GeneratorConfig, rng=None):
    """Draw a random ground-truth model and simulate ``config.T`` observations.

    The graph is Erdos-Renyi with ``config.edge_probability`` over unordered
    pairs, oriented along a random permutation. Parameters are drawn uniformly
    from the configured ranges. All structural draws happen before the latent
    paths are simulated, so two configs that differ only in ``T`` share the
    same graph and parameters for the same seed.

    Returns
    -------
    (TimeSeriesDataset, CausalGraph, SemParameters, LatentTrajectory)
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    m = config.m
    U = lambda rng_range, size=None: rng.uniform(rng_range[0], rng_range[1], size)  # noqa: E731

    adj = _random_dag(m, config.edge_probability, rng)
    mask = adj.T.astype(bool)
    alpha0 = U(config.alpha0_range, (m, m)) * mask
    alpha = U(config.alpha_range, (1, m, m)) * mask
    w = U(config.w_range, (m, m)) * mask

    varying = config.scenario != "coef-only"
    sigma2 = U(config.sigma2_range, m)
    beta0 = U(config.beta0_range, m)
    beta = U(config.beta_range, (1, m))
    v = U(config.v_range, m)

    s_lag = config.s_lag if config.scenario == "with-lags" else 0
    lag_adj = (rng.random((s_lag, m, m)) < config.lag_edge_probability).astype(int)
    lag_mask = lag_adj.transpose(0, 2, 1).astype(bool)
    gamma0 = np.zeros((s_lag, m, m))
    gamma = U(config.gamma_range, (s_lag, 1, m, m)) * lag_mask[:, None]
    u = U(config.u_range, (s_lag, m, m)) * lag_mask

    params = SemParameters(
        alpha0=alpha0, alpha=alpha, w=w,
        beta0=beta0, beta=beta, v=v,
        gamma0=gamma0, gamma=gamma if s_lag else np.zeros((0, 1, m, m)), u=u,
        sigma2_fixed=None if varying else sigma2,
        mask=mask, lag_mask=lag_mask,
    )
    latents = simulate_latents(params, config.T, rng)
    data = simulate_observations(latents, params, rng)
    graph = CausalGraph(adj, lagged=lag_adj, edge_scores=np.abs(latents.B).mean(axis=0).T)
    return data, graph, params, latents
