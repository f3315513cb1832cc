"""Core data containers: parameters, latent trajectories, graphs and datasets."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..exceptions import InvalidInputError, InvalidModelError

SCENARIOS = ("coef-only", "coef-and-variance", "with-lags")


def _as_float(a, shape, name):
    arr = np.array(a, dtype=float)
    if arr.shape != tuple(shape):
        raise InvalidModelError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def topological_order(adj) -> Optional[list]:
    """Kahn ordering of a binary adjacency with ``adj[j, i] = 1`` for ``j -> i``.

    Returns None when the graph has a cycle.
    """
    adj = np.asarray(adj) != 0
    m = adj.shape[0]
    indeg = adj.sum(axis=0).astype(int)
    ready = [i for i in range(m) if indeg[i] == 0]
    order = []
    while ready:
        j = ready.pop(0)
        order.append(j)
        for i in np.flatnonzero(adj[j]):
            indeg[i] -= 1
            if indeg[i] == 0:
                ready.append(int(i))
    return order if len(order) == m else None


def validate_acyclic(adj) -> bool:
    """True iff the directed graph encoded by ``adj`` has no cycle.

    ``adj[j, i] = 1`` encodes the edge ``x_j -> x_i``.
    """
    adj = np.asarray(adj)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise InvalidInputError(f"adjacency must be square, got shape {adj.shape}")
    if np.any(np.diag(adj) != 0):
        raise InvalidInputError("adjacency must have a zero diagonal")
    return topological_order(adj) is not None


@dataclass
class SemParameters:
    """Static parameters of the time-varying structural equation model.

    Coefficient arrays follow the ``b_ij`` convention: entry ``[i, j]``
    belongs to the coefficient of ``x_j`` in the equation of ``x_i``.
    ``mask[i, j]`` marks ``b_ij`` as a latent coefficient; all other entries of
    ``B_t`` are structurally zero. ``lag_mask[s-1, i, j]`` does the same for the
    lag-``s`` coefficient ``c_ij``.

    Parameters
    ----------
    alpha0 : (m, m) array
    alpha : (p_lag, m, m) array
    w : (m, m) array
    beta0 : (m,) array
    beta : (q_lag, m) array
    v : (m,) array
    gamma0 : (s_lag, m, m) array
    gamma : (s_lag, r_lag, m, m) array
    u : (s_lag, m, m) array
    sigma2_fixed : (m,) array or None
        Constant noise variances. When given, the log-variances are not latent.
    mask, lag_mask : bool arrays
    init_mean, init_var : dict, optional
        Overrides of the initial-state prior, keyed by ``"B"``, ``"h"``, ``"C"``
        with arrays shaped like ``alpha0``, ``beta0`` and ``gamma0``. Missing
        groups use the stationary moments of their AR process.
    """

    alpha0: np.ndarray
    alpha: np.ndarray
    w: np.ndarray
    beta0: np.ndarray
    beta: np.ndarray
    v: np.ndarray
    gamma0: np.ndarray
    gamma: np.ndarray
    u: np.ndarray
    sigma2_fixed: Optional[np.ndarray]
    mask: np.ndarray
    lag_mask: np.ndarray
    init_mean: Optional[dict] = None
    init_var: Optional[dict] = None

    def __post_init__(self):
        self.alpha0 = np.array(self.alpha0, dtype=float)
        m = self.alpha0.shape[0]
        self.alpha = np.array(self.alpha, dtype=float).reshape(-1, m, m)
        self.w = _as_float(self.w, (m, m), "w")
        self.beta0 = _as_float(self.beta0, (m,), "beta0")
        self.beta = np.array(self.beta, dtype=float).reshape(-1, m)
        self.v = _as_float(self.v, (m,), "v")
        self.gamma0 = np.array(self.gamma0, dtype=float).reshape(-1, m, m)
        s = self.gamma0.shape[0]
        self.gamma = np.array(self.gamma, dtype=float).reshape(s, -1, m, m) if s else np.zeros((0, 1, m, m))
        self.u = _as_float(self.u, (s, m, m), "u")
        if self.sigma2_fixed is not None:
            self.sigma2_fixed = _as_float(self.sigma2_fixed, (m,), "sigma2_fixed")
        self.mask = np.array(self.mask, dtype=bool).reshape(m, m)
        self.lag_mask = np.array(self.lag_mask, dtype=bool).reshape(s, m, m)
        self.validate()

    # -- shape helpers -------------------------------------------------
    @property
    def m(self) -> int:
        return self.alpha0.shape[0]

    @property
    def p_lag(self) -> int:
        return self.alpha.shape[0]

    @property
    def q_lag(self) -> int:
        return self.beta.shape[0]

    @property
    def s_lag(self) -> int:
        return self.gamma0.shape[0]

    @property
    def r_lag(self) -> int:
        return self.gamma.shape[1] if self.s_lag else 0

    @property
    def varying_variance(self) -> bool:
        return self.sigma2_fixed is None

    @property
    def scenario(self) -> str:
        if self.s_lag > 0:
            return "with-lags"
        return "coef-and-variance" if self.varying_variance else "coef-only"

    @property
    def max_order(self) -> int:
        orders = [self.p_lag]
        if self.varying_variance:
            orders.append(self.q_lag)
        if self.s_lag:
            orders.append(self.r_lag)
        return max(orders)

    def validate(self):
        m = self.m
        if self.alpha0.shape != (m, m):
            raise InvalidModelError("alpha0 must be square")
        if self.p_lag < 1:
            raise InvalidModelError("p_lag must be at least 1")
        if self.varying_variance and self.q_lag < 1:
            raise InvalidModelError("q_lag must be at least 1 when variances vary")
        if self.s_lag and self.r_lag < 1:
            raise InvalidModelError("r_lag must be at least 1 when lags are modelled")
        for name in ("alpha", "beta", "gamma"):
            arr = getattr(self, name)
            if arr.size and np.any(np.abs(arr) >= 1.0):
                raise InvalidModelError(f"{name} entries must lie strictly inside (-1, 1)")
        for name in ("w", "v", "u"):
            arr = getattr(self, name)
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise InvalidModelError(f"{name} entries must be finite and nonnegative")
        if self.sigma2_fixed is not None and np.any(self.sigma2_fixed <= 0):
            raise InvalidModelError("sigma2_fixed entries must be positive")
        if np.any(np.diag(self.mask)):
            raise InvalidModelError("mask must have a zero diagonal")
        for name in ("alpha0", "beta0", "gamma0"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidModelError(f"{name} must be finite")

    def copy(self, **changes) -> "SemParameters":
        base = {
            name: (np.array(getattr(self, name), copy=True) if isinstance(getattr(self, name), np.ndarray) else getattr(self, name))
            for name in self.__dataclass_fields__
        }
        base.update(changes)
        return SemParameters(**base)

    @classmethod
    def create(
        cls,
        m: int,
        *,
        p_lag: int = 1,
        q_lag: int = 1,
        s_lag: int = 0,
        r_lag: int = 1,
        sigma2_fixed=None,
        mask=None,
        lag_mask=None,
        alpha_ar: float = 0.9,
        w: float = 0.05,
        beta_ar: float = 0.9,
        v: float = 0.05,
        gamma_ar: float = 0.9,
        u: float = 0.05,
        beta0=None,
    ) -> "SemParameters":
        """Uniform parameter set used as the starting point of estimation.

        AR coefficients are split evenly over the lags (``alpha_ar / p_lag`` for
        each lag), intercepts are zero unless ``beta0`` is given.
        """
        if mask is None:
            mask = ~np.eye(m, dtype=bool)
        if lag_mask is None:
            lag_mask = np.ones((s_lag, m, m), dtype=bool)
        off = ~np.eye(m, dtype=bool)
        return cls(
            alpha0=np.zeros((m, m)),
            alpha=np.full((p_lag, m, m), alpha_ar / p_lag) * off,
            w=np.full((m, m), w) * off,
            beta0=np.zeros(m) if beta0 is None else np.broadcast_to(np.asarray(beta0, float), (m,)),
            beta=np.full((q_lag, m), beta_ar / q_lag),
            v=np.full(m, v),
            gamma0=np.zeros((s_lag, m, m)),
            gamma=np.full((s_lag, r_lag, m, m), gamma_ar / r_lag),
            u=np.full((s_lag, m, m), u),
            sigma2_fixed=sigma2_fixed,
            mask=mask,
            lag_mask=lag_mask,
        )

    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            val = getattr(self, name)
            if isinstance(val, np.ndarray):
                out[name] = val.tolist()
            elif isinstance(val, dict):
                out[name] = {k: np.asarray(x).tolist() for k, x in val.items()}
            else:
                out[name] = val
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SemParameters":
        d = dict(d)
        m = len(d["alpha0"])
        for key in ("init_mean", "init_var"):
            if d.get(key) is not None:
                d[key] = {k: np.asarray(x, dtype=float) for k, x in d[key].items()}
        s = len(d["gamma0"])
        if s == 0:
            d["gamma0"] = np.zeros((0, m, m))
            d["gamma"] = np.zeros((0, 1, m, m))
            d["u"] = np.zeros((0, m, m))
            d["lag_mask"] = np.zeros((0, m, m), dtype=bool)
        return cls(**d)


@dataclass
class LatentTrajectory:
    """Per-time latent states.

    Attributes
    ----------
    B : (T, m, m) array, zero diagonal
    h : (T, m) array of log noise variances
    C : (s_lag, T, m, m) array of lagged coefficients
    """

    B: np.ndarray
    h: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        T, m = self.h.shape
        self.C = np.asarray(self.C, dtype=float).reshape(-1, T, m, m)
        if self.B.shape != (T, m, m):
            raise InvalidModelError("B and h disagree on (T, m)")
        if not (np.all(np.isfinite(self.B)) and np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.C))):
            raise InvalidModelError("latent trajectory contains non-finite entries")

    @property
    def T(self) -> int:
        return self.h.shape[0]

    @property
    def m(self) -> int:
        return self.h.shape[1]


@dataclass
class CausalGraph:
    """Binary causal structure; ``instantaneous[j, i] = 1`` iff ``x_j -> x_i``."""

    instantaneous: np.ndarray
    lagged: np.ndarray = None
    edge_scores: np.ndarray = None
    lagged_scores: np.ndarray = None

    def __post_init__(self):
        self.instantaneous = (np.asarray(self.instantaneous) != 0).astype(int)
        m = self.instantaneous.shape[0]
        if self.lagged is None:
            self.lagged = np.zeros((0, m, m), dtype=int)
        self.lagged = (np.asarray(self.lagged) != 0).astype(int).reshape(-1, m, m)
        if self.edge_scores is None:
            self.edge_scores = self.instantaneous.astype(float)
        self.edge_scores = np.asarray(self.edge_scores, dtype=float)
        if self.lagged_scores is None:
            self.lagged_scores = self.lagged.astype(float)

    @property
    def m(self) -> int:
        return self.instantaneous.shape[0]

    def edges(self) -> set:
        return {(int(j), int(i)) for j, i in zip(*np.nonzero(self.instantaneous))}

    def parents(self, i: int) -> list:
        return [int(j) for j in np.flatnonzero(self.instantaneous[:, i])]

    def children(self, j: int) -> list:
        return [int(i) for i in np.flatnonzero(self.instantaneous[j, :])]

    def is_acyclic(self) -> bool:
        return validate_acyclic(self.instantaneous)

    @classmethod
    def from_edges(cls, m: int, edges: Sequence, **kw) -> "CausalGraph":
        adj = np.zeros((m, m), dtype=int)
        for j, i in edges:
            adj[j, i] = 1
        return cls(adj, **kw)


@dataclass
class TimeSeriesDataset:
    values: np.ndarray
    names: list = field(default=None)

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.ndim != 2:
            raise InvalidInputError("values must be a T x m matrix")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("dataset contains missing or non-finite values")
        if self.names is None:
            self.names = [f"x{i + 1}" for i in range(self.m)]
        self.names = [str(n) for n in self.names]
        if len(self.names) != self.m:
            raise InvalidInputError("number of names does not match number of columns")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def head(self, T: int) -> "TimeSeriesDataset":
        return TimeSeriesDataset(self.values[:T], list(self.names))

    def index(self, target) -> int:
        if isinstance(target, (int, np.integer)):
            if not 0 <= target < self.m:
                raise InvalidInputError(f"target index {target} out of range")
            return int(target)
        if target in self.names:
            return self.names.index(target)
        try:
            return self.index(int(target))
        except ValueError:
            raise InvalidInputError(f"unknown variable {target!r}") from None


@dataclass
class GeneratorConfig:
    """Settings of the synthetic benchmark generator.

    Defaults reproduce the published protocol for the first two scenarios.
    The lag-related ranges are only used by ``scenario="with-lags"`` and are
    kept small so that the simulated process stays bounded.
    """

    m: int = 5
    T: int = 500
    seed: int = 0
    edge_probability: float = 0.3
    scenario: str = "coef-only"
    sigma2_range: tuple = (0.1, 0.5)
    w_range: tuple = (0.01, 0.1)
    v_range: tuple = (0.01, 0.1)
    alpha_range: tuple = (0.8, 0.998)
    beta_range: tuple = (0.8, 0.998)
    alpha0_range: tuple = (0.0, 0.0)
    beta0_range: tuple = (0.0, 0.0)
    s_lag: int = 1
    lag_edge_probability: float = 0.2
    gamma_range: tuple = (0.8, 0.95)
    u_range: tuple = (0.001, 0.005)

    def __post_init__(self):
        self.validate()

    def validate(self):
        from ..exceptions import InvalidConfigError

        if self.scenario not in SCENARIOS:
            raise InvalidConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.m < 1 or self.T < 3:
            raise InvalidConfigError("need m >= 1 and T >= 3")
        for name in ("edge_probability", "lag_edge_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidConfigError(f"{name} must lie in [0, 1]")
        for name in ("sigma2_range", "w_range", "v_range", "alpha_range", "beta_range",
                     "alpha0_range", "beta0_range", "gamma_range", "u_range"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise InvalidConfigError(f"{name} must be a valid interval, got {(lo, hi)}")
            setattr(self, name, (float(lo), float(hi)))
        for name in ("alpha_range", "beta_range", "gamma_range"):
            lo, hi = getattr(self, name)
            if lo <= -1 or hi >= 1:
                raise InvalidConfigError(f"{name} must lie inside (-1, 1)")
        if self.sigma2_range[0] <= 0:
            raise InvalidConfigError("sigma2_range must be positive")
        for name in ("w_range", "v_range", "u_range"):
            if getattr(self, name)[0] < 0:
                raise InvalidConfigError(f"{name} must be nonnegative")

    def replace(self, **changes) -> "GeneratorConfig":
        return replace(self, **changes)
