"""Observation densities and AR moment utilities."""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidInputError, NonstationaryError
from .layout import LatentLayout

LOG_2PI = float(np.log(2.0 * np.pi))


def ar_stationary_moments(a0: float, a1: float, w: float):
    """Stationary ``(mean, variance)`` of ``z_t = a0 + a1 z_{t-1} + N(0, w)``."""
    if not abs(a1) < 1:
        raise NonstationaryError(f"AR coefficient {a1} is outside (-1, 1)")
    if w < 0:
        raise InvalidInputError("innovation variance must be nonnegative")
    return a0 / (1.0 - a1), w / (1.0 - a1 * a1)


def observation_loglik(x, B, h, lag_contribution=None) -> float:
    """Log density of one observation vector given its latent state.

    Computes ``sum_i log N(x_i; sum_j B[i, j] x_j + lag_i, exp(h_i))`` plus
    ``log|det(I - B)|``. The determinant term is exactly zero when the
    nonzero pattern of ``B`` is acyclic, in which case the density factorises
    node by node.
    """
    x = np.asarray(x, dtype=float)
    B = np.asarray(B, dtype=float)
    h = np.asarray(h, dtype=float)
    m = x.shape[0]
    lag = np.zeros(m) if lag_contribution is None else np.asarray(lag_contribution, dtype=float)
    for name, arr in (("x", x), ("B", B), ("h", h), ("lag_contribution", lag)):
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError(f"{name} contains non-finite values")
    if B.shape != (m, m) or h.shape != (m,) or lag.shape != (m,):
        raise InvalidInputError("shape mismatch between x, B, h and lag_contribution")
    resid = x - B @ x - lag
    ll = -0.5 * np.sum(LOG_2PI + h + resid**2 * np.exp(-h))
    pattern = (B != 0).T
    from .types import topological_order

    if topological_order(pattern) is None:
        ll += np.linalg.slogdet(np.eye(m) - B)[1]
    return float(ll)


def batch_loglik(layout: LatentLayout, x, lag_x, Z, nodes=None) -> np.ndarray:
    """Observation log-likelihood of ``x`` under every state in ``Z[..., d]``.

    ``lag_x[s]`` holds ``X_{t-s-1}`` (zeros before the series start).
    ``nodes`` (boolean, length m) restricts the node-wise sum; the
    determinant term is always included.
    """
    pred = (Z[..., layout.sl_b] * x[layout.b_cols]) @ layout.b_scatter
    if layout.n_c:
        pred = pred + (Z[..., layout.sl_c] * lag_x[layout.c_lag, layout.c_cols]) @ layout.c_scatter
    resid = x - pred
    h = Z[..., layout.sl_h] if layout.has_h else layout.log_sigma2
    terms = LOG_2PI + h + resid**2 * np.exp(-h)
    if nodes is not None:
        terms = terms[..., nodes]
    ll = -0.5 * np.sum(terms, axis=-1)
    if layout.cyclic:
        ll = ll + np.linalg.slogdet(np.eye(layout.m) - layout.B_matrix(Z))[1]
    return ll


def path_loglik(layout: LatentLayout, X, Z) -> np.ndarray:
    """Per-time observation log-likelihood along state paths.

    ``Z`` has shape (..., T, d); returns shape (..., T).
    """
    m = np.shape(X)[1]
    resid = node_residuals(layout, X, Z)
    h = layout.h_vector(Z)
    ll = -0.5 * np.sum(LOG_2PI + h + resid**2 * np.exp(-h), axis=-1)
    if layout.cyclic:
        ll = ll + np.linalg.slogdet(np.eye(m) - layout.B_matrix(Z))[1]
    return ll


def node_residuals(layout: LatentLayout, X, Z) -> np.ndarray:
    """``(I - B_t) X_t - sum_s C_t^(s) X_{t-s}`` along state paths (..., T, m)."""
    X = np.asarray(X, dtype=float)
    T, m = X.shape
    pred = (Z[..., layout.sl_b] * X[:, layout.b_cols]) @ layout.b_scatter
    if layout.n_c:
        lag_stack = np.zeros((T, layout.s_lag, m))
        for s in range(layout.s_lag):
            lag_stack[s + 1:, s] = X[: T - s - 1]
        pred = pred + (Z[..., layout.sl_c] * lag_stack[:, layout.c_lag, layout.c_cols]) @ layout.c_scatter
    return X - pred
