"""Cross-time fourth-moment statistics and root-cause detection.

For a variable that receives no changing causal influence, the statistic
``S_i(p) = E[x_{i,t}^2 x_{i,t+p}^2]`` does not depend on the lag ``p >= 1``.
Variables driven through time-varying coefficients inherit the slowly
decaying autocorrelation of those coefficients, so their profile decreases
in ``p``. The flattest profile therefore points at the root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError
from .model.types import TimeSeriesDataset

MIN_PAIRS = 30


def _values(data) -> np.ndarray:
    X = data.values if isinstance(data, TimeSeriesDataset) else np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _check_lag(T, p):
    if p < 0:
        raise InvalidInputError("lag must be nonnegative")
    if T - p < MIN_PAIRS:
        raise InvalidInputError(f"need at least {MIN_PAIRS} pairs, got {T - p} for lag {p}")


def kurtosis_statistic(data, i: int, p: int) -> float:
    """Sample mean of ``x_{i,t}^2 x_{i,t+p}^2``.

    ``p = 0`` gives the fourth moment, exposed as a baseline; root detection
    uses ``p >= 1`` only.
    """
    X = _values(data)
    T = X.shape[0]
    _check_lag(T, p)
    sq = X[:, i] ** 2
    return float(np.mean(sq[: T - p] * sq[p:]))


def _lag_profile(sq, p_max):
    T = sq.shape[0]
    return np.array([np.mean(sq[: T - p] * sq[p:]) for p in range(1, p_max + 1)])


def _drop_zscore(sq, p_max, n_batches=20):
    """``S(1) - S(p_max)`` over its batch-means standard error."""
    n = sq.shape[0] - p_max
    diff = sq[:n] * (sq[1: n + 1] - sq[p_max: n + p_max])
    batches = np.array_split(diff, n_batches)
    means = np.array([b.mean() for b in batches])
    se = means.std(ddof=1) / np.sqrt(n_batches)
    drop = diff.mean()
    if se == 0:
        return 0.0 if drop == 0 else np.inf * np.sign(drop)
    return float(drop / se)


@dataclass
class RootDetection:
    """Outcome of :func:`detect_root`.

    ``profile[i, p-1]`` is ``S_i(p)``; ``scores`` are the flatness scores
    (lower is flatter). ``drop_z`` is ``S_i(1) - S_i(p_max)`` in units of its
    batch-means standard error, and ``candidates`` lists the best variable
    plus every other one whose drop is not significant. ``baseline`` holds
    ``S_i(0)``. Unpacks as ``(root, profile)``.
    """

    root: int
    profile: np.ndarray
    scores: np.ndarray
    candidates: list
    baseline: np.ndarray
    drop_z: np.ndarray

    def __iter__(self):
        return iter((self.root, self.profile))

    @property
    def tied(self) -> bool:
        return len(self.candidates) > 1


def detect_root(data, p_max: int = 5, z_crit: float = 3.0) -> RootDetection:
    """Pick the variable whose lag profile ``S_i(1..p_max)`` is flattest.

    The flatness score is the mean absolute successive difference of the
    profile divided by its mean. Other variables tie with the flattest one
    when their own profile shows no drop beyond ``z_crit`` standard errors.
    """
    if p_max < 2:
        raise InvalidInputError("p_max must be at least 2")
    X = _values(data)
    T, m = X.shape
    _check_lag(T, p_max)
    profile = np.empty((m, p_max))
    scores = np.zeros(m)
    drop_z = np.zeros(m)
    baseline = np.empty(m)
    for i in range(m):
        sq = X[:, i] ** 2
        profile[i] = _lag_profile(sq, p_max)
        baseline[i] = np.mean(sq * sq)
        level = profile[i].mean()
        if level > 0:
            scores[i] = np.mean(np.abs(np.diff(profile[i]))) / level
            drop_z[i] = _drop_zscore(sq, p_max)
    best = int(np.argmin(scores))
    candidates = [best] + [i for i in range(m) if i != best and abs(drop_z[i]) <= z_crit]
    return RootDetection(best, profile, scores, sorted(candidates), baseline, drop_z)


def root_noise_variance(data, root: int, p: int = 1) -> float:
    """Noise variance of a root variable, ``sqrt(S_root(p))``."""
    if p < 1:
        raise InvalidInputError("lag must be at least 1")
    return float(np.sqrt(kurtosis_statistic(data, root, p)))
