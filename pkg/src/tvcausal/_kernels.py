"""Compiled CPF-AS sweep.

Mirrors ``smoother._sweep_numpy`` step for step on pre-drawn random numbers.
Loaded lazily; when numba is missing the numpy engine is used instead.
"""

from __future__ import annotations

import math

import numpy as np

try:
    import numba

    AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    AVAILABLE = False

LOG_2PI = math.log(2.0 * math.pi)


def _njit(fn):
    return numba.njit(cache=True, nogil=True)(fn) if AVAILABLE else fn


@_njit
def _scad1(x, lam, a):
    ax = abs(x)
    if ax <= lam:
        return lam * ax
    if ax <= a * lam:
        return -(ax * ax - 2.0 * a * lam * ax + lam * lam) / (2.0 * (a - 1.0))
    return (a + 1.0) * lam * lam / 2.0


@_njit
def _pick(p, n, u):
    total = 0.0
    for k in range(n):
        total += p[k]
    target = u * total
    acc = 0.0
    for k in range(n):
        acc += p[k]
        if acc > target:
            return k
    return n - 1


@_njit
def _normalize(lw, out):
    top = -np.inf
    for k in range(lw.shape[0]):
        if lw[k] > top:
            top = lw[k]
    s = 0.0
    for k in range(lw.shape[0]):
        out[k] = math.exp(lw[k] - top)
        s += out[k]
    for k in range(lw.shape[0]):
        out[k] /= s


@_njit
def _loglik(x, lagx, z, b_rows, b_cols, h_start, has_h, log_sigma2, c_lag, c_rows, c_cols, c_start,
            cyclic, nodes, pred, Imb):
    m = x.shape[0]
    for i in range(m):
        pred[i] = 0.0
    for k in range(b_rows.shape[0]):
        pred[b_rows[k]] += z[k] * x[b_cols[k]]
    for k in range(c_rows.shape[0]):
        pred[c_rows[k]] += z[c_start + k] * lagx[c_lag[k], c_cols[k]]
    ll = 0.0
    for i in range(m):
        if not nodes[i]:
            continue
        h = z[h_start + i] if has_h else log_sigma2[i]
        r = x[i] - pred[i]
        ll += -0.5 * (LOG_2PI + h + r * r * math.exp(-h))
    if cyclic:
        for i in range(m):
            for j in range(m):
                Imb[i, j] = 1.0 if i == j else 0.0
        for k in range(b_rows.shape[0]):
            Imb[b_rows[k], b_cols[k]] -= z[k]
        sign, logdet = np.linalg.slogdet(Imb)
        if sign == 0.0:
            ll = -np.inf
        else:
            ll += logdet
    return ll


@_njit
def _draw(windows_j, t, eps_j, intercept, coefs, sd, order, init_mean, init_sd, out):
    d = out.shape[0]
    for k in range(d):
        if t >= order[k]:
            mean = intercept[k]
            for lag in range(coefs.shape[0]):
                mean += coefs[lag, k] * windows_j[lag, k]
            out[k] = mean + sd[k] * eps_j[k]
        else:
            out[k] = init_mean[k] + init_sd[k] * eps_j[k]


@_njit
def _ref_logdensity(window_j, ref, t, intercept, coefs, var, order):
    T, d = ref.shape
    L = coefs.shape[0]
    total = 0.0
    nsteps = min(L, T - t)
    for step in range(nsteps):
        tt = t + step
        for k in range(d):
            if tt < order[k] or step >= order[k]:
                continue
            mean = intercept[k]
            for lag in range(L):
                back = step - 1 - lag
                val = ref[t + back, k] if back >= 0 else window_j[lag - step, k]
                mean += coefs[lag, k] * val
            diff = ref[tt, k] - mean
            if var[k] == 0.0:
                if abs(diff) > 1e-9 * (1.0 + abs(mean)):
                    return -np.inf
            else:
                total += -0.5 * (LOG_2PI + math.log(var[k]) + diff * diff / var[k])
    return total


@_njit
def _sweep_core(X, ref, eps, unif, intercept, coefs, var, order, init_mean, init_var,
                b_rows, b_cols, h_start, has_h, log_sigma2, c_lag, c_rows, c_cols, c_start, s_lag,
                cyclic, lam, a, conditional, idx, is_b, nodes, background):
    T, m = X.shape
    M = eps.shape[1]
    d = ref.shape[1]
    L = coefs.shape[0]
    penalize = lam > 0.0
    sd = np.sqrt(var)
    init_sd = np.sqrt(init_var)

    particles = np.empty((T, M, d))
    log_w = np.empty((T, M))
    ancestors = np.empty((T, M), dtype=np.int64)
    windows = np.zeros((M, L, d))
    new_windows = np.zeros((M, L, d))
    w = np.empty(M)
    logits = np.empty(M)
    anc = np.empty(M, dtype=np.int64)
    pred = np.empty(m)
    Imb = np.empty((m, m))
    full = np.empty(background.shape[1])
    lagx = np.zeros((max(s_lag, 1), m))
    fallbacks = 0
    n_free = M - 1 if conditional else M

    for t in range(T):
        for s in range(s_lag):
            for i in range(m):
                lagx[s, i] = X[t - s - 1, i] if t - s - 1 >= 0 else 0.0
        if t == 0:
            for j in range(M):
                anc[j] = j
                if j < n_free:
                    _draw(windows[j], 0, eps[0, j], intercept, coefs, sd, order, init_mean, init_sd,
                          particles[0, j])
                else:
                    particles[0, j] = ref[0]
        else:
            top = -np.inf
            for j in range(M):
                if log_w[t - 1, j] > top:
                    top = log_w[t - 1, j]
            if not math.isfinite(top):
                return particles, log_w, ancestors, fallbacks, t - 1
            _normalize(log_w[t - 1], w)
            for j in range(n_free):
                anc[j] = _pick(w, M, unif[t, j])
            if conditional:
                any_finite = False
                for j in range(M):
                    logits[j] = log_w[t - 1, j] + _ref_logdensity(windows[j], ref, t, intercept, coefs, var, order)
                    if math.isfinite(logits[j]):
                        any_finite = True
                if any_finite:
                    _normalize(logits, logits)
                    anc[M - 1] = _pick(logits, M, unif[t, M - 1])
                else:
                    anc[M - 1] = _pick(w, M, unif[t, M - 1])
                    fallbacks += 1
            for j in range(M):
                pw = windows[anc[j]]
                if j < n_free:
                    _draw(pw, t, eps[t, j], intercept, coefs, sd, order, init_mean, init_sd, particles[t, j])
                else:
                    particles[t, j] = ref[t]
                new_windows[j, 0] = particles[t, j]
                for lag in range(1, L):
                    new_windows[j, lag] = pw[lag - 1]
        full[:] = background[t]
        for j in range(M):
            ancestors[t, j] = anc[j]
            z = particles[t, j]
            for k in range(d):
                full[idx[k]] = z[k]
            lw = _loglik(X[t], lagx, full, b_rows, b_cols, h_start, has_h, log_sigma2, c_lag, c_rows, c_cols,
                         c_start, cyclic, nodes, pred, Imb)
            if penalize:
                pen = 0.0
                for k in range(d):
                    if is_b[k]:
                        pen += _scad1(z[k], lam, a)
                        if t > 0:
                            pen += _scad1(z[k] - windows[anc[j], 0, k], lam, a)
                lw -= pen
            log_w[t, j] = lw
        if t == 0:
            for j in range(M):
                windows[j, 0] = particles[0, j]
        else:
            windows[:, :, :] = new_windows
    return particles, log_w, ancestors, fallbacks, -1


def sweep(layout, X, ref_path, eps, unif, lam, a, block):
    """Run the compiled sweep; same return convention as the numpy engine.

    ``ref_path=None`` runs an unconditional bootstrap filter.
    """
    dyn = layout.block_dynamics(block.idx)
    T = X.shape[0]
    conditional = ref_path is not None
    if not conditional:
        ref_path = np.zeros((T, dyn.d))
    background = block.background if block.background is not None else np.zeros((T, layout.d))
    ls2 = layout.log_sigma2 if layout.log_sigma2 is not None else np.zeros(layout.m)
    i64 = lambda v: np.ascontiguousarray(v, dtype=np.int64)  # noqa: E731
    particles, log_w, ancestors, fallbacks, bad = _sweep_core(
        np.ascontiguousarray(X), np.ascontiguousarray(ref_path, dtype=float), eps, unif,
        dyn.intercept, np.ascontiguousarray(dyn.coefs), dyn.var, i64(dyn.order), dyn.init_mean, dyn.init_var,
        i64(layout.b_rows), i64(layout.b_cols), layout.sl_h.start, bool(layout.has_h),
        np.asarray(ls2, dtype=float), i64(layout.c_lag), i64(layout.c_rows), i64(layout.c_cols),
        layout.sl_c.start, int(layout.s_lag), bool(layout.cyclic), float(lam), float(a), conditional,
        i64(block.idx), np.ascontiguousarray(dyn.is_b), np.ascontiguousarray(block.nodes, dtype=np.bool_),
        np.ascontiguousarray(background, dtype=float),
    )
    if bad >= 0:
        return None, int(bad)
    return (particles, log_w, ancestors.astype(int), int(fallbacks)), -1
