"""One-step-ahead forecasting through the Markov blanket of a target.

Particles at the last observed time are pushed one AR step forward to give a
Monte Carlo ensemble of coefficients and noise variances. The predictive
density of a node given its parents is the ensemble average of Normal
densities; a random-walk Metropolis-Hastings chain then samples the target
given its parents, its children and the children's other parents.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import InvalidConfigError, InvalidInputError
from .model.layout import LatentLayout
from .model.likelihood import LOG_2PI, batch_loglik
from .model.types import CausalGraph, SemParameters
from .smoother import normalize_log_weights, propagate_particle

BURN_IN = 100


def _logsumexp(v):
    top = v.max()
    if not np.isfinite(top):
        return top
    return top + np.log(np.exp(v - top).sum())


@dataclass
class PredictiveEnsemble:
    """Samples of the time-``T+1`` coefficients and noise variances.

    ``B`` is (J, m, m) with ``B[j, i, k]`` the effect of ``x_k`` on ``x_i``;
    ``sigma2`` is (J, m) and ``C`` is (s_lag, J, m, m). ``states`` and
    ``windows`` keep the flat propagated states and their lag windows so the
    cloud can be updated once ``X_{T+1}`` is observed.
    """

    B: np.ndarray
    sigma2: np.ndarray
    C: np.ndarray
    weights: np.ndarray
    states: np.ndarray
    windows: np.ndarray
    layout: LatentLayout

    def __post_init__(self):
        if self.B.shape[0] < 1:
            raise InvalidInputError("ensemble needs at least one sample")
        if np.any(self.sigma2 <= 0):
            raise InvalidInputError("variance samples must be positive")

    @property
    def J(self) -> int:
        return self.B.shape[0]


def _resample(weights, n, rng):
    w = np.asarray(weights, dtype=float)
    cdf = np.cumsum(w)
    return np.minimum(np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right"), len(w) - 1)


def propagate_coefficients_one_step(particles_at_T, theta, rng, weights=None,
                                    n_samples: Optional[int] = None) -> PredictiveEnsemble:
    """Advance final-time particles one AR step.

    Parameters
    ----------
    particles_at_T : (n, L, d) or (n, d) array, or a fit result
        Lag windows ending at the last observed time (slice 0 most recent).
        An object with ``final_windows``/``final_weights`` is accepted too.
    theta : SemParameters or LatentLayout
    weights : (n,) array, optional
        Particle weights; uniform when omitted.
    n_samples : int, optional
        Resample this many windows by weight before propagating; otherwise
        every window is propagated once and keeps its weight.
    """
    if hasattr(particles_at_T, "final_windows"):
        weights = particles_at_T.final_weights if weights is None else weights
        particles_at_T = particles_at_T.final_windows
    layout = theta if isinstance(theta, LatentLayout) else LatentLayout(theta)
    windows = np.asarray(particles_at_T, dtype=float)
    if windows.ndim == 2:
        windows = windows[:, None, :]
    n = windows.shape[0]
    if n == 0:
        raise InvalidInputError("no particles to propagate")
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float) / np.sum(weights)
    if n_samples is not None:
        windows = windows[_resample(w, n_samples, rng)]
        w = np.full(n_samples, 1.0 / n_samples)
    if windows.shape[1] < layout.L:
        pad = np.repeat(windows[:, -1:], layout.L - windows.shape[1], axis=1)
        windows = np.concatenate([windows, pad], axis=1)
    states = propagate_particle(windows[:, : layout.L], layout, rng)
    B = layout.B_matrix(states)
    sigma2 = np.exp(np.array(layout.h_vector(states), dtype=float))
    C = np.moveaxis(layout.C_matrices(states), -3, 0)
    return PredictiveEnsemble(B=B, sigma2=sigma2, C=C, weights=w, states=states,
                              windows=windows[:, : layout.L], layout=layout)


def predictive_density(value: float, regressors, coefs, variances, offset=0.0, weights=None) -> float:
    """Monte Carlo predictive density ``mean_j N(value; <coefs_j, regressors> + offset_j, var_j)``.

    ``coefs`` is (J, k) and ``regressors`` (k,); with ``k = 0`` the means are
    just ``offset``.
    """
    return float(np.exp(log_predictive_density(value, regressors, coefs, variances, offset, weights)))


def log_predictive_density(value, regressors, coefs, variances, offset=0.0, weights=None) -> float:
    variances = np.atleast_1d(np.asarray(variances, dtype=float))
    J = variances.shape[0]
    if J == 0:
        raise InvalidInputError("empty ensemble")
    coefs = np.asarray(coefs, dtype=float).reshape(J, -1)
    regressors = np.asarray(regressors, dtype=float).reshape(-1)
    mean = coefs @ regressors + offset if regressors.size else np.zeros(J) + offset
    log_pdf = -0.5 * (LOG_2PI + np.log(variances) + (value - mean) ** 2 / variances)
    log_w = np.full(J, -np.log(J)) if weights is None else np.log(np.asarray(weights) / np.sum(weights))
    return float(_logsumexp(log_pdf + log_w))


def _lag_stack(history, s_lag, m):
    """``lag[s] = X_{T+1-s-1}`` taken from the observed history."""
    out = np.zeros((max(s_lag, 1), m))
    if history is None:
        return out
    H = np.asarray(history, dtype=float)
    for s in range(min(s_lag, H.shape[0])):
        out[s] = H[-1 - s]
    return out


def node_terms(ensemble: PredictiveEnsemble, node: int, graph: CausalGraph, history=None):
    """Coefficients on the contemporaneous values, lag offsets and variances of one node.

    Coefficients of variables that are not parents in ``graph`` are zeroed.
    Returns ``(coefs (J, m), offset (J,), variances (J,))``.
    """
    m = ensemble.B.shape[1]
    parent_mask = graph.instantaneous[:, node].astype(bool)
    coefs = ensemble.B[:, node, :] * parent_mask
    offset = np.zeros(ensemble.J)
    s_lag = ensemble.C.shape[0]
    if s_lag:
        lags = _lag_stack(history, s_lag, m)
        for s in range(s_lag):
            c = ensemble.C[s, :, node, :]
            if graph.lagged.shape[0] > s:
                c = c * graph.lagged[s][:, node].astype(bool)
            offset += c @ lags[s]
    return coefs, offset, ensemble.sigma2[:, node]


def _proposal_log_ratio(current: float, proposed: float) -> float:
    """Log Hastings correction ``log q(current | proposed) - log q(proposed | current)``.

    The Gaussian random walk is symmetric, so this is exactly zero.
    """
    return 0.0


class _BlanketDensity:
    """Unnormalised log density of the target given its Markov blanket."""

    def __init__(self, target, graph, ensemble, observed, history):
        x = np.array(observed, dtype=float)
        x[target] = 0.0
        coefs, offset, var = node_terms(ensemble, target, graph, history)
        self.target_mean = coefs @ x + offset
        self.target_var = var
        self.log_w = np.log(ensemble.weights / ensemble.weights.sum())
        self.children = []
        for c in graph.children(target):
            cc, off, v = node_terms(ensemble, c, graph, history)
            base = cc @ x + off
            self.children.append((float(observed[c]), base, cc[:, target], v))

    def __call__(self, y):
        lp = -0.5 * (LOG_2PI + np.log(self.target_var) + (y - self.target_mean) ** 2 / self.target_var)
        total = _logsumexp(lp + self.log_w)
        for value, base, slope, v in self.children:
            mean = base + slope * y
            lp = -0.5 * (LOG_2PI + np.log(v) + (value - mean) ** 2 / v)
            total += _logsumexp(lp + self.log_w)
        return float(total)


def mh_forecast(target: int, graph: CausalGraph, ensemble: PredictiveEnsemble, observed, N: int = 2000,
                rng=None, history=None, proposal_sd: Optional[float] = None, init: Optional[float] = None):
    """Metropolis-Hastings forecast of ``Y_{T+1}`` given its observed blanket.

    Parameters
    ----------
    target : int
    graph : CausalGraph
        Acyclic instantaneous graph defining parents and children.
    ensemble : PredictiveEnsemble
    observed : (m,) array
        Values at ``T+1``; the target's own entry is ignored.
    N : int
        Chain length after the initial state; must exceed the 100-sample burn-in.
    history : (T, m) array, optional
        Observations up to ``T``; supplies lagged regressors, the default
        proposal scale (std of the last 200 target values) and the default
        start (last observed target value).

    Returns
    -------
    (float, ndarray)
        Mean of samples ``100..N`` and the full trace ``Y^(0..N)``.
    """
    if N <= BURN_IN:
        raise InvalidConfigError(f"N must exceed the burn-in of {BURN_IN}")
    rng = np.random.default_rng() if rng is None else rng
    m = ensemble.B.shape[1]
    if not 0 <= target < m:
        raise InvalidInputError(f"target {target} out of range")
    observed = np.asarray(observed, dtype=float)
    if proposal_sd is None:
        proposal_sd = 1.0
        if history is not None and len(history) > 1:
            sd = float(np.std(np.asarray(history)[-200:, target]))
            proposal_sd = sd if sd > 0 else 1.0
    if init is None:
        init = float(history[-1][target]) if history is not None and len(history) else 0.0

    log_target = _BlanketDensity(target, graph, ensemble, observed, history)
    trace = np.empty(N + 1)
    y = init
    lp = log_target(y)
    trace[0] = y
    steps = proposal_sd * rng.standard_normal(N)
    log_u = np.log(rng.random(N))
    for i in range(N):
        cand = y + steps[i]
        lp_cand = log_target(cand)
        if log_u[i] < lp_cand - lp + _proposal_log_ratio(y, cand):
            y, lp = cand, lp_cand
        trace[i + 1] = y
    return float(trace[BURN_IN:].mean()), trace


def mc_standard_error(trace, burn_in: int = BURN_IN, n_batches: int = 20) -> float:
    """Batch-means Monte Carlo standard error of a chain's post-burn-in mean."""
    kept = np.asarray(trace, dtype=float)[burn_in:]
    if kept.size < 2 * n_batches:
        raise InvalidInputError("chain too short for batch means")
    means = np.array([b.mean() for b in np.array_split(kept, n_batches)])
    return float(means.std(ddof=1) / np.sqrt(n_batches))


def direct_predictive_mean(target: int, graph: CausalGraph, ensemble: PredictiveEnsemble, observed,
                           history=None):
    """Mean and standard deviation of the target's own predictive mixture.

    When the target has no children this is the stationary law of the MH
    chain, so the chain mean should agree up to its Monte Carlo error.
    """
    x = np.array(observed, dtype=float)
    x[target] = 0.0
    coefs, offset, var = node_terms(ensemble, target, graph, history)
    mean = coefs @ x + offset
    w = ensemble.weights / ensemble.weights.sum()
    mu = float(w @ mean)
    second = float(w @ (var + mean**2))
    sd = np.sqrt(max(second - mu**2, 0.0))
    return mu, sd


def sample_predictive(target: int, graph: CausalGraph, ensemble: PredictiveEnsemble, observed, size: int, rng,
                      history=None) -> np.ndarray:
    """Direct draws from the target's predictive mixture (no children involved)."""
    x = np.array(observed, dtype=float)
    x[target] = 0.0
    coefs, offset, var = node_terms(ensemble, target, graph, history)
    mean = coefs @ x + offset
    j = _resample(ensemble.weights, size, rng)
    return mean[j] + np.sqrt(var[j]) * rng.standard_normal(size)


def assimilate(ensemble: PredictiveEnsemble, x_new, rng, history=None) -> np.ndarray:
    """Condition the propagated cloud on an observed ``X_{T+1}``.

    Weights every propagated state by the observation density, resamples
    and returns lag windows ending at ``T+1`` ready for the next step.
    """
    layout = ensemble.layout
    lags = _lag_stack(history, layout.s_lag, layout.m)
    log_w = batch_loglik(layout, np.asarray(x_new, dtype=float), lags, ensemble.states)
    log_w = log_w + np.log(ensemble.weights)
    if not np.any(np.isfinite(log_w)):
        sel = _resample(ensemble.weights, ensemble.J, rng)
    else:
        sel = _resample(normalize_log_weights(log_w), ensemble.J, rng)
    prev = ensemble.windows[sel]
    return np.concatenate([ensemble.states[sel][:, None, :], prev[:, : layout.L - 1]], axis=1)


def forecast_path(params: SemParameters, graph: CausalGraph, windows, X, T_fit: int, steps: int, targets,
                  rng, N: int = 2000, n_samples: int = 300, weights=None) -> np.ndarray:
    """Successive one-step forecasts of ``X[T_fit : T_fit + steps]``.

    After each step the observed values are assimilated into the particle
    cloud. Returns an array (steps, len(targets)).
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < T_fit + steps:
        raise InvalidInputError("not enough observations for the requested steps")
    layout = LatentLayout(params)
    preds = np.empty((steps, len(targets)))
    for k in range(steps):
        t = T_fit + k
        ens = propagate_coefficients_one_step(windows, layout, rng, weights=weights, n_samples=n_samples)
        history = X[:t]
        for col, target in enumerate(targets):
            preds[k, col] = mh_forecast(target, graph, ens, X[t], N=N, rng=rng, history=history)[0]
        windows = assimilate(ens, X[t], rng, history=history)
        weights = None
    return preds
