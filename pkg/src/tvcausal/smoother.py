"""Conditional particle filter with ancestor sampling (CPF-AS).

One sweep keeps a prespecified reference path as the last particle, samples
new ancestry for it, and returns a weighted particle system together with a
freshly drawn path that serves as the next reference. Iterating sweeps gives a
Markov chain whose stationary law is the smoothing posterior of the latent
coefficients and log-variances.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DegenerateWeightsError, InvalidInputError
from . import _kernels
from .graph import scad
from .model.layout import LatentLayout
from .model.likelihood import LOG_2PI, batch_loglik, observation_loglik
from .model.types import LatentTrajectory, TimeSeriesDataset

logger = logging.getLogger(__name__)


def _layout(theta) -> LatentLayout:
    return theta if isinstance(theta, LatentLayout) else LatentLayout(theta)


def normalize_log_weights(log_w) -> np.ndarray:
    """Max-shifted exponentiation followed by normalisation."""
    log_w = np.asarray(log_w, dtype=float)
    top = np.max(log_w)
    w = np.exp(log_w - top)
    return w / w.sum()


def _categorical(p, size, rng) -> np.ndarray:
    cdf = np.cumsum(p)
    idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
    return np.minimum(idx, len(p) - 1)


@dataclass
class ParticleSystem:
    """Output of one CPF-AS sweep.

    Arrays are time-major: ``particles[t, j]`` is the flat latent state of
    particle ``j`` at time ``t`` and ``ancestors[t, j]`` the index of its parent
    at ``t - 1`` (``ancestors[0]`` is the identity). ``coords`` lists the
    state coordinates a blocked sweep covered.
    """

    particles: np.ndarray
    log_weights: np.ndarray
    ancestors: np.ndarray
    layout: LatentLayout
    coords: Optional[np.ndarray] = None

    @property
    def M(self) -> int:
        return self.particles.shape[1]

    @property
    def T(self) -> int:
        return self.particles.shape[0]

    @property
    def weights(self) -> np.ndarray:
        """Normalised importance weights, shape (T, M)."""
        lw = self.log_weights - self.log_weights.max(axis=1, keepdims=True)
        w = np.exp(lw)
        return w / w.sum(axis=1, keepdims=True)

    def lineage(self) -> np.ndarray:
        """Index table ``L[t, j]``: particle at ``t`` on the path ending in ``j``."""
        T, M = self.ancestors.shape
        idx = np.empty((T, M), dtype=int)
        idx[-1] = np.arange(M)
        for t in range(T - 1, 0, -1):
            idx[t - 1] = self.ancestors[t, idx[t]]
        return idx

    def paths(self) -> np.ndarray:
        """Full ancestral paths of the final particles, shape (M, T, d)."""
        lin = self.lineage()
        return np.swapaxes(self.particles[np.arange(self.T)[:, None], lin], 0, 1)

    def trajectory(self, j: int) -> LatentTrajectory:
        if self.coords is not None and self.coords.size != self.layout.d:
            raise InvalidInputError("trajectory needs a sweep over the full state")
        return self.layout.to_trajectory(self.paths()[j])


# -- transition kernel ---------------------------------------------------

def _transition_step(layout: LatentLayout, windows, t, eps):
    """AR transition of every window given standard normal draws ``eps``."""
    act = layout.active(t)
    init = layout.init_mean + np.sqrt(layout.init_var) * eps
    if not np.any(act):
        return init
    step = layout.ar_mean(windows) + np.sqrt(layout.var) * eps
    return np.where(act, step, init)


def propagate_particle(prev_states, theta, rng, t: Optional[int] = None) -> np.ndarray:
    """Draw the next latent state from the AR transition.

    Parameters
    ----------
    prev_states : array, shape (L, d) or (n, L, d)
        Lag window with ``prev_states[..., 0, :]`` the most recent slice.
    theta : SemParameters or LatentLayout
    t : int, optional
        0-based time of the new state. Coordinates whose AR order exceeds
        ``t`` are drawn from their initial prior. Defaults to a time where
        every process follows its recursion.
    """
    layout = _layout(theta)
    windows = np.asarray(prev_states, dtype=float)
    single = windows.ndim == 2
    if single:
        windows = windows[None]
    if windows.shape[1] < layout.L:
        raise InvalidInputError(f"window length {windows.shape[1]} is below the AR order {layout.L}")
    windows = windows[:, : layout.L]
    eps = rng.standard_normal((windows.shape[0], layout.d))
    out = _transition_step(layout, windows, layout.L if t is None else t, eps)
    return out[0] if single else out


def _zero_var_logpdf(z, mean, var):
    """Elementwise Normal log density that treats ``var == 0`` as a point mass.

    A matching point mass contributes 0 (a constant factor common to all
    candidates), a mismatch contributes ``-inf``.
    """
    diff = z - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -0.5 * (LOG_2PI + np.log(var) + diff**2 / var)
    zero = var == 0
    if np.any(zero):
        hit = np.abs(diff) <= 1e-9 * (1.0 + np.abs(mean))
        out = np.where(zero, np.where(hit, 0.0, -np.inf), out)
    return out


def transition_logdensity(layout: LatentLayout, windows, ref_path, t) -> np.ndarray:
    """Log density of the reference continuation under each candidate parent.

    ``windows[j]`` is the lag window ending at ``t - 1`` of candidate ``j``;
    ``ref_path`` holds reference slices from ``t`` onwards. For AR orders above
    one the reference slices ``t .. t + L - 1`` all depend on the parent's
    history and are included.
    """
    n = windows.shape[0]
    total = np.zeros(n)
    L = layout.L
    for step in range(min(L, len(ref_path))):
        tt = t + step
        rel = layout.active(tt) & (step < layout.order)
        if not np.any(rel):
            continue
        win = np.empty((n, L, layout.d))
        for lag in range(L):
            back = step - 1 - lag
            win[:, lag] = ref_path[back] if back >= 0 else windows[:, lag - step]
        mean = layout.ar_mean(win)
        lp = _zero_var_logpdf(ref_path[step][rel], mean[:, rel], layout.var[rel])
        total += lp.sum(axis=1)
    return total


# -- weights and ancestry ------------------------------------------------

def weight_particle(x_t, state, theta, lag_contribution=None) -> float:
    """Observation density ``p(X_t | Z_t)`` of one flat latent state."""
    layout = _layout(theta)
    state = np.asarray(state, dtype=float)
    B = layout.B_matrix(state)
    h = np.asarray(layout.h_vector(state), dtype=float)
    return float(np.exp(observation_loglik(x_t, B, h, lag_contribution)))


def sample_ancestors(weights, rng, size: Optional[int] = None) -> np.ndarray:
    """Multinomial ancestor indices for the ``M - 1`` free particles."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidInputError("weights must be finite and nonnegative")
    if w.sum() <= 0:
        raise DegenerateWeightsError(None, "all ancestor weights are zero")
    n = len(w) - 1 if size is None else size
    return _categorical(w / w.sum(), n, rng)


def _reference_ancestor(log_w, logf, rng):
    logits = log_w + logf
    if not np.any(np.isfinite(logits)):
        logger.warning("reference transition has zero density under every parent; "
                       "falling back to weight-only ancestor sampling")
        return int(_categorical(normalize_log_weights(log_w), 1, rng)[0]), True
    return int(_categorical(normalize_log_weights(logits), 1, rng)[0]), False


def sample_reference_ancestor(weights, prev_states, ref_state, theta, rng, t: Optional[int] = None) -> int:
    """Ancestor of the pinned particle, ``P(j) ~ w_j f(ref | parent_j)``.

    ``prev_states`` is (M, L, d) with slice 0 the most recent; ``ref_state`` is
    either a single slice (d,) or the reference continuation (k, d).
    """
    layout = _layout(theta)
    w = np.asarray(weights, dtype=float)
    if w.sum() <= 0:
        raise DegenerateWeightsError(t, "all ancestor weights are zero")
    windows = np.asarray(prev_states, dtype=float)
    if windows.ndim == 2:
        windows = windows[:, None, :]
    ref = np.atleast_2d(np.asarray(ref_state, dtype=float))
    with np.errstate(divide="ignore"):
        log_w = np.log(w)
    logf = transition_logdensity(layout, windows[:, : layout.L], ref, layout.L if t is None else t)
    return _reference_ancestor(log_w, logf, rng)[0]


def _lag_window(X, t, s_lag):
    m = X.shape[1]
    out = np.zeros((max(s_lag, 1), m))
    for s in range(s_lag):
        if t - s - 1 >= 0:
            out[s] = X[t - s - 1]
    return out


# -- the sweep -----------------------------------------------------------

def _pick(p, u):
    """Inverse-cdf categorical draw for a uniform ``u`` in [0, 1)."""
    cdf = np.cumsum(p)
    return min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(p) - 1)


@dataclass
class SweepBlock:
    """Coordinates updated by one sweep, with the rest held at ``background``.

    ``nodes`` marks the equations whose density depends on the block. The
    default block covers the whole state.
    """

    idx: np.ndarray
    nodes: np.ndarray
    background: Optional[np.ndarray] = None

    @classmethod
    def full(cls, layout: LatentLayout):
        return cls(np.arange(layout.d), np.ones(layout.m, dtype=bool))


def _sweep_numpy(layout, X, ref_path, eps, unif, lam, a, block):
    T, m = X.shape
    M = eps.shape[1]
    dyn = layout.block_dynamics(block.idx)
    d, L = dyn.d, dyn.L
    penalize = lam > 0
    conditional = ref_path is not None
    n_free = M - 1 if conditional else M
    nodes = None if block.nodes.all() else block.nodes
    background = np.zeros((T, layout.d)) if block.background is None else block.background
    particles = np.empty((T, M, d))
    log_w = np.empty((T, M))
    ancestors = np.empty((T, M), dtype=int)
    ancestors[0] = np.arange(M)
    fallbacks = 0

    def weigh(t, z, parent_now):
        full = np.repeat(background[t][None], M, axis=0)
        full[:, block.idx] = z
        lw = batch_loglik(layout, X[t], _lag_window(X, t, layout.s_lag), full, nodes)
        if penalize:
            pen = scad(z[:, dyn.is_b], lam, a).sum(axis=-1)
            if parent_now is not None:
                pen = pen + scad(z[:, dyn.is_b] - parent_now[:, dyn.is_b], lam, a).sum(axis=-1)
            lw = lw - pen
        return lw

    windows = np.zeros((M, L, d))
    z = _transition_step(dyn, windows, 0, eps[0])
    if conditional:
        z[M - 1] = ref_path[0]
    particles[0] = z
    log_w[0] = weigh(0, z, None)
    windows[:, 0] = z

    for t in range(1, T):
        prev = log_w[t - 1]
        if not np.isfinite(prev.max()):
            return None, t - 1
        w = normalize_log_weights(prev)
        cdf = np.cumsum(w)
        anc = np.empty(M, dtype=int)
        anc[:n_free] = np.minimum(np.searchsorted(cdf, unif[t, :n_free] * cdf[-1], side="right"), M - 1)
        if conditional:
            logits = prev + transition_logdensity(dyn, windows, ref_path[t: t + L], t)
            if np.any(np.isfinite(logits)):
                anc[M - 1] = _pick(normalize_log_weights(logits), unif[t, M - 1])
            else:
                logger.warning("reference transition has zero density under every parent; "
                               "falling back to weight-only ancestor sampling")
                anc[M - 1] = _pick(w, unif[t, M - 1])
                fallbacks += 1
        parent = windows[anc]
        z = _transition_step(dyn, parent, t, eps[t])
        if conditional:
            z[M - 1] = ref_path[t]
        particles[t] = z
        log_w[t] = weigh(t, z, parent[:, 0])
        ancestors[t] = anc
        windows = np.concatenate([z[:, None, :], parent[:, : L - 1]], axis=1)
    return (particles, log_w, ancestors, fallbacks), -1


def run_sweep(layout: LatentLayout, X, ref_path, M: int, rng, scad_penalty=None, engine: str = "auto",
              block: Optional[SweepBlock] = None):
    """CPF-AS on flat arrays.

    All random numbers of the sweep are drawn up front, so the compiled and
    the pure numpy engines produce the same draws for the same generator
    state.

    Parameters
    ----------
    ref_path : (T, n) array or None
        Reference for the swept coordinates; ``None`` runs an unconditional
        bootstrap filter.
    scad_penalty : (lambda, a), optional
        Switches the weights to the penalised likelihood.
    engine : {"auto", "numba", "numpy"}
    block : SweepBlock, optional
        Restricts the sweep to a subset of coordinates, the others fixed at
        ``block.background``. Defaults to the full state.

    Returns
    -------
    (ParticleSystem, next_ref_path, n_fallbacks)
    """
    X = np.asarray(X, dtype=float)
    T, m = X.shape
    block = block if block is not None else SweepBlock.full(layout)
    d = block.idx.size
    if ref_path is not None and ref_path.shape != (T, d):
        raise InvalidInputError(f"reference path has shape {ref_path.shape}, expected {(T, d)}")
    if block.background is not None and block.background.shape != (T, layout.d):
        raise InvalidInputError("background path does not match the state layout")
    lam, a = scad_penalty if scad_penalty is not None else (0.0, 3.7)
    eps = rng.standard_normal((T, M, d))
    unif = rng.random((T, M))
    u_final = rng.random()

    if engine == "auto":
        engine = "numba" if _kernels.AVAILABLE else "numpy"
    if engine == "numba":
        out, bad_t = _kernels.sweep(layout, X, ref_path, eps, unif, lam, a, block)
        if out is not None and out[3]:
            logger.warning("reference transition had zero density under every parent at %d steps; "
                           "used weight-only ancestor sampling", out[3])
    elif engine == "numpy":
        out, bad_t = _sweep_numpy(layout, X, ref_path, eps, unif, lam, a, block)
    else:
        raise InvalidInputError(f"unknown engine {engine!r}")
    if out is None:
        raise DegenerateWeightsError(bad_t)
    particles, log_w, ancestors, fallbacks = out
    if not np.isfinite(log_w[-1].max()):
        raise DegenerateWeightsError(T - 1)
    system = ParticleSystem(particles, log_w, ancestors, layout, coords=block.idx)
    k = _pick(normalize_log_weights(log_w[-1]), u_final)
    lin = system.lineage()[:, k]
    next_ref = particles[np.arange(T), lin]
    return system, next_ref, int(fallbacks)


def cpf_as_sweep(data: TimeSeriesDataset, theta, reference: LatentTrajectory, M: int, rng,
                 scad_penalty=None):
    """Run one conditional sweep.

    Parameters
    ----------
    data : TimeSeriesDataset
    theta : SemParameters
    reference : LatentTrajectory
        Path pinned as particle ``M``; entries outside the candidate masks
        are ignored.
    M : int
        Number of particles. ``M = 1`` returns the reference unchanged.

    Returns
    -------
    (ParticleSystem, LatentTrajectory)
    """
    if M < 1:
        raise InvalidInputError("need at least one particle")
    layout = _layout(theta)
    X = data.values if isinstance(data, TimeSeriesDataset) else np.asarray(data, dtype=float)
    if reference.T != X.shape[0]:
        raise InvalidInputError("reference length differs from the data length")
    ref_path = layout.from_trajectory(reference)
    system, next_ref, _ = run_sweep(layout, X, ref_path, M, rng, scad_penalty)
    return system, layout.to_trajectory(next_ref)


__all__ = [
    "ParticleSystem",
    "cpf_as_sweep",
    "normalize_log_weights",
    "propagate_particle",
    "run_sweep",
    "sample_ancestors",
    "sample_reference_ancestor",
    "transition_logdensity",
    "weight_particle",
]
