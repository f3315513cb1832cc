"""Flat state-vector layout of the latent processes.

A particle at time t is a vector holding, in order, the candidate entries of
``B_t`` (columns stacked after dropping the diagonal), the log-variances
``h_t`` when they are latent, and the candidate entries of every ``C_t^(s)``.
Each coordinate follows its own scalar AR recursion, so the transition is
described by per-coordinate intercepts, lag coefficients and innovation
variances.
"""

from __future__ import annotations

import numpy as np

from .types import LatentTrajectory, SemParameters, topological_order


def _companion_moments(a0, coefs, var):
    """Stationary mean/variance of one AR(p) process; None when nonstationary."""
    p = len(coefs)
    total = float(np.sum(coefs))
    if p == 1:
        if abs(coefs[0]) >= 1:
            return None
        return a0 / (1.0 - coefs[0]), var / (1.0 - coefs[0] ** 2)
    comp = np.zeros((p, p))
    comp[0] = coefs
    comp[1:, :-1] = np.eye(p - 1)
    if np.max(np.abs(np.linalg.eigvals(comp))) >= 1:
        return None
    from scipy.linalg import solve_discrete_lyapunov

    q = np.zeros((p, p))
    q[0, 0] = var
    cov = solve_discrete_lyapunov(comp, q)
    return a0 / (1.0 - total), float(cov[0, 0])


def stationary_prior(a0, coefs, var):
    """Vectorised stationary moments with the N(0, 1) fallback.

    ``coefs`` has shape (order, n). Nonstationary coordinates and the
    degenerate case (zero variance at a zero mean) use N(0, 1).
    """
    a0 = np.asarray(a0, dtype=float)
    if a0.size == 0:
        return np.zeros(0), np.ones(0)
    coefs = np.asarray(coefs, dtype=float).reshape(-1, a0.size)
    var = np.asarray(var, dtype=float)
    mean = np.zeros(a0.size)
    pvar = np.ones(a0.size)
    if coefs.shape[0] == 1:
        a1 = coefs[0]
        ok = np.abs(a1) < 1
        mean[ok] = a0[ok] / (1.0 - a1[ok])
        pvar[ok] = var[ok] / (1.0 - a1[ok] ** 2)
    else:
        for k in range(a0.size):
            res = _companion_moments(a0[k], coefs[:, k], var[k])
            if res is not None:
                mean[k], pvar[k] = res
    degenerate = (pvar == 0) & (mean == 0)
    pvar[degenerate] = 1.0
    return mean, pvar


class LatentLayout:
    """Mapping between :class:`SemParameters` and flat per-coordinate AR arrays."""

    def __init__(self, params: SemParameters):
        self.params = params
        m = params.m
        self.m = m
        self.s_lag = params.s_lag
        cols, rows = np.nonzero(params.mask.T)
        self.b_rows, self.b_cols = rows, cols
        self.n_b = rows.size
        self.has_h = params.varying_variance
        self.n_h = m if self.has_h else 0
        lag_cols = []
        lag_rows = []
        lag_idx = []
        for s in range(params.s_lag):
            c, r = np.nonzero(params.lag_mask[s].T)
            lag_rows.append(r)
            lag_cols.append(c)
            lag_idx.append(np.full(r.size, s))
        self.c_rows = np.concatenate(lag_rows) if lag_rows else np.zeros(0, int)
        self.c_cols = np.concatenate(lag_cols) if lag_cols else np.zeros(0, int)
        self.c_lag = np.concatenate(lag_idx) if lag_idx else np.zeros(0, int)
        self.n_c = self.c_rows.size
        self.d = self.n_b + self.n_h + self.n_c
        self.sl_b = slice(0, self.n_b)
        self.sl_h = slice(self.n_b, self.n_b + self.n_h)
        self.sl_c = slice(self.n_b + self.n_h, self.d)

        self.groups = [("B", self.sl_b, params.p_lag)]
        if self.has_h:
            self.groups.append(("h", self.sl_h, params.q_lag))
        if self.n_c or params.s_lag:
            self.groups.append(("C", self.sl_c, params.r_lag))
        self.L = max(order for _, _, order in self.groups)

        self.order = np.zeros(self.d, dtype=int)
        self.intercept = np.zeros(self.d)
        self.coefs = np.zeros((self.L, self.d))
        self.var = np.zeros(self.d)
        for name, sl, order in self.groups:
            self.order[sl] = order
            a0, co, var = self._group_params(name)
            self.intercept[sl] = a0
            self.coefs[:order, sl] = co
            self.var[sl] = var

        # one-hot scatter matrices: (z * x[cols]) @ scatter sums into rows
        self.b_scatter = np.zeros((self.n_b, m))
        self.b_scatter[np.arange(self.n_b), self.b_rows] = 1.0
        self.c_scatter = np.zeros((self.n_c, m))
        self.c_scatter[np.arange(self.n_c), self.c_rows] = 1.0
        self.cyclic = topological_order(params.mask.T) is None
        self.log_sigma2 = None if self.has_h else np.log(params.sigma2_fixed)
        self.init_mean, self.init_var = self._initial_moments()

    # -- parameter extraction -------------------------------------------
    def _group_params(self, name):
        p = self.params
        if name == "B":
            r, c = self.b_rows, self.b_cols
            return p.alpha0[r, c], p.alpha[:, r, c], p.w[r, c]
        if name == "h":
            return p.beta0, p.beta, p.v
        r, c, s = self.c_rows, self.c_cols, self.c_lag
        return p.gamma0[s, r, c], p.gamma[s, :, r, c].T.reshape(p.r_lag, -1), p.u[s, r, c]

    def _group_override(self, name, which):
        src = getattr(self.params, which)
        if not src or name not in src:
            return None
        arr = np.asarray(src[name], dtype=float)
        if name == "B":
            return arr[self.b_rows, self.b_cols]
        if name == "h":
            return arr
        return arr[self.c_lag, self.c_rows, self.c_cols]

    def _initial_moments(self):
        mean = np.zeros(self.d)
        var = np.ones(self.d)
        for name, sl, order in self.groups:
            mu, v = stationary_prior(self.intercept[sl], self.coefs[:order, sl], self.var[sl])
            om = self._group_override(name, "init_mean")
            ov = self._group_override(name, "init_var")
            mean[sl] = mu if om is None else om
            var[sl] = v if ov is None else ov
        return mean, var

    def with_group_params(self, name, intercept, coefs, var) -> SemParameters:
        """Return a copy of the parameters with one group's AR values replaced."""
        p = self.params
        if name == "B":
            a0, al, w = p.alpha0.copy(), p.alpha.copy(), p.w.copy()
            r, c = self.b_rows, self.b_cols
            a0[r, c] = intercept
            al[:, r, c] = coefs
            w[r, c] = var
            return p.copy(alpha0=a0, alpha=al, w=w)
        if name == "h":
            return p.copy(beta0=np.asarray(intercept, float), beta=np.asarray(coefs, float),
                          v=np.asarray(var, float))
        g0, g, u = p.gamma0.copy(), p.gamma.copy(), p.u.copy()
        r, c, s = self.c_rows, self.c_cols, self.c_lag
        g0[s, r, c] = intercept
        for lag in range(p.r_lag):
            g[s, lag, r, c] = coefs[lag]
        u[s, r, c] = var
        return p.copy(gamma0=g0, gamma=g, u=u)

    # -- state <-> matrices --------------------------------------------
    def split(self, Z):
        Z = np.asarray(Z)
        return Z[..., self.sl_b], Z[..., self.sl_h], Z[..., self.sl_c]

    def B_matrix(self, Z):
        zb = np.asarray(Z)[..., self.sl_b]
        B = np.zeros(zb.shape[:-1] + (self.m, self.m))
        B[..., self.b_rows, self.b_cols] = zb
        return B

    def h_vector(self, Z):
        Z = np.asarray(Z)
        if self.has_h:
            return Z[..., self.sl_h]
        return np.broadcast_to(self.log_sigma2, Z.shape[:-1] + (self.m,))

    def C_matrices(self, Z):
        zc = np.asarray(Z)[..., self.sl_c]
        C = np.zeros(zc.shape[:-1] + (self.s_lag, self.m, self.m))
        C[..., self.c_lag, self.c_rows, self.c_cols] = zc
        return C

    def to_trajectory(self, Z) -> LatentTrajectory:
        """Expand a (T, d) state path into a :class:`LatentTrajectory`."""
        Z = np.asarray(Z, dtype=float)
        B = self.B_matrix(Z)
        h = np.array(self.h_vector(Z), dtype=float)
        C = np.moveaxis(self.C_matrices(Z), -3, 0)
        return LatentTrajectory(B=B, h=h, C=C)

    def from_trajectory(self, traj: LatentTrajectory) -> np.ndarray:
        T = traj.T
        Z = np.zeros((T, self.d))
        Z[:, self.sl_b] = traj.B[:, self.b_rows, self.b_cols]
        if self.has_h:
            Z[:, self.sl_h] = traj.h
        if self.n_c:
            Z[:, self.sl_c] = traj.C[self.c_lag, :, self.c_rows, self.c_cols].T
        return Z

    def coordinate_names(self, names=None) -> list:
        names = names or [f"x{i + 1}" for i in range(self.m)]
        out = [f"b[{names[i]}<-{names[j]}]" for i, j in zip(self.b_rows, self.b_cols)]
        if self.has_h:
            out += [f"h[{n}]" for n in names]
        out += [f"c{s + 1}[{names[i]}<-{names[j]}]" for s, i, j in zip(self.c_lag, self.c_rows, self.c_cols)]
        return out

    def node_blocks(self):
        """Coordinates entering each node's equation: ``[(node, index array), ...]``.

        Block ``i`` holds row ``i`` of ``B``, ``h_i`` and the lagged
        coefficients into node ``i``; every coordinate belongs to one block.
        """
        out = []
        for i in range(self.m):
            idx = [np.flatnonzero(self.b_rows == i)]
            if self.has_h:
                idx.append(np.array([self.sl_h.start + i]))
            idx.append(self.sl_c.start + np.flatnonzero(self.c_rows == i))
            out.append((i, np.concatenate(idx).astype(int)))
        return out

    def block_dynamics(self, idx) -> "BlockDynamics":
        return BlockDynamics(self, idx)

    # -- transition ------------------------------------------------------
    def ar_mean(self, window):
        """Conditional AR mean given ``window[..., l, :] = z_{t-1-l}``."""
        return self.intercept + np.einsum("...ld,ld->...d", window, self.coefs)

    def active(self, t):
        """Coordinates following the AR recursion at 0-based time ``t``."""
        return t >= self.order


class BlockDynamics:
    """AR transition restricted to a subset of coordinates of a layout."""

    def __init__(self, layout: LatentLayout, idx):
        idx = np.asarray(idx, dtype=int)
        self.idx = idx
        self.d = idx.size
        self.L = layout.L
        self.order = layout.order[idx]
        self.intercept = layout.intercept[idx]
        self.coefs = layout.coefs[:, idx]
        self.var = layout.var[idx]
        self.init_mean = layout.init_mean[idx]
        self.init_var = layout.init_var[idx]
        self.is_b = idx < layout.n_b

    def ar_mean(self, window):
        return self.intercept + np.einsum("...ld,ld->...d", window, self.coefs)

    def active(self, t):
        return t >= self.order
