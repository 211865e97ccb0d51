"""Compiled inner loops shared by the prufer, model and generator modules.

Everything that touches the recursion lives here so that the public single-step
functions, the generator and the replay path run the exact same machine code.
Status codes are returned instead of raising inside compiled code.
"""

import math

import numpy as np
from numba import njit

OK = 0
STEP_TOO_LARGE = 1

PI = math.pi
TWO_PI = 2.0 * math.pi
DEGENERATE_SIN = 1e-15


@njit(cache=True)
def reduce2(phi):
    """phi modulo 2, in [0, 2)."""
    return phi - 2.0 * math.floor(0.5 * phi)


@njit(cache=True)
def wrap(f, w):
    """Move whole turns of 2 from the fraction f into the winding count w."""
    if f >= 2.0 or f < 0.0:
        m = math.floor(0.5 * f)
        f = f - 2.0 * m
        w = w + m
        if f >= 2.0:
            f -= 2.0
            w += 1.0
    return f, w


@njit(cache=True)
def step(logR, f, w, V, k, s):
    """One exact Prufer step on the angle ``f + 2 w``; returns (logR', f', w', status).

    The angle is carried as a fraction in [0, 2) plus an integral winding
    count (stored as a float) so rounding never grows with the number of turns.
    """
    t = V / s
    if not abs(t) < 0.5:
        return logR, f, w, STEP_TOO_LARGE
    f, w = wrap(f, w)
    x = PI * f
    sx = math.sin(x)
    if abs(sx) < DEGENERATE_SIN:
        f1, w1 = wrap(f + k, w)
        return logR, f1, w1, OK
    cx = math.cos(x)
    tw = t * sx
    # R'^2/R^2 = 1 - 2 tw cos + tw^2; angle shift measured in the rotated frame
    logR1 = logR + 0.5 * math.log1p(tw * (tw - 2.0 * cx))
    f1, w1 = wrap(f + k + math.atan2(tw * sx, 1.0 - tw * cx) / PI, w)
    return logR1, f1, w1, OK


@njit(cache=True)
def sin_pi(f):
    return math.sin(PI * f)


@njit(cache=True)
def advance(logR, f, w, V, k, s, u2sum):
    """Advance one state through the values V.

    Returns final (logR, f, w, u2sum, status, failed_index). u2sum accumulates
    u(n)^2 = R(n)^2 sin^2(pi phi(n)) for every site visited before stepping.
    """
    for i in range(V.shape[0]):
        sn = sin_pi(f)
        u2sum += math.exp(2.0 * logR) * sn * sn
        logR, f, w, st = step(logR, f, w, V[i], k, s)
        if st != OK:
            return logR, f, w, u2sum, st, i
    return logR, f, w, u2sum, OK, -1


@njit(cache=True)
def _record(si, rows, lr, f, w, u2, out_logR, out_phi, out_u2):
    for r in range(rows.shape[0]):
        out_logR[r, si] = lr[r]
        out_phi[r, si] = f[r] + 2.0 * w[r]
        out_u2[r, si] = u2[r]


@njit(cache=True)
def generate(kind, n0, n_end, b, K1, ks, ss, lr, f, w, u2,
             stop_log_drop, min_len, samp_n, out_V, out_logR, out_phi, out_u2):
    """Run the generating recursion on [n0, n_end).

    Row 0 (and row 1 for ``kind == 2``, a resonant pair) are the targets whose
    angles define V; the other rows are bystanders.  ``ks``, ``ss`` hold each
    row's quasimomentum and sin(pi k); ``lr``, ``f``, ``w``, ``u2`` hold the
    state and are updated in place.  stop_log_drop > 0 ends the run once every
    target's logR fell by that much and at least min_len sites were emitted.
    States are recorded at the sorted sites samp_n (state *at* n, before
    stepping).  Returns (n_stop, status, fail_site).
    """
    ntgt = 1 if kind == 1 else 2
    rows = np.arange(lr.shape[0])
    start0 = lr[0]
    start1 = lr[1] if ntgt == 2 else 0.0
    for r in range(lr.shape[0]):
        f[r], w[r] = wrap(f[r], w[r])
    si = 0
    nsamp = samp_n.shape[0]
    n = n0
    while n < n_end:
        while si < nsamp and samp_n[si] == n:
            _record(si, rows, lr, f, w, u2, out_logR, out_phi, out_u2)
            si += 1
        if stop_log_drop > 0.0 and n - n0 >= min_len:
            done = start0 - lr[0] >= stop_log_drop
            if ntgt == 2:
                done = done and (start1 - lr[1] >= stop_log_drop)
            if done:
                break
        if ntgt == 2:
            V = K1 * (math.sin(TWO_PI * f[0]) + math.sin(TWO_PI * f[1]) + 100.0) / (n - b)
        else:
            V = K1 * (math.sin(TWO_PI * f[0]) + 100.0) / (n - b)
        out_V[n - n0] = V
        for r in range(lr.shape[0]):
            sn = sin_pi(f[r])
            u2[r] += math.exp(2.0 * lr[r]) * sn * sn
            a, c, d, st = step(lr[r], f[r], w[r], V, ks[r], ss[r])
            if st != OK:
                return n, st, n
            lr[r] = a
            f[r] = c
            w[r] = d
        n += 1
    while si < nsamp and samp_n[si] == n:
        _record(si, rows, lr, f, w, u2, out_logR, out_phi, out_u2)
        si += 1
    return n, OK, -1


@njit(cache=True)
def replay(kind, n0, n_end, b, K1, k, s, theta0, theta1, out_V):
    """Recompute V on [n0, n_end) from the anchor angles only."""
    kt = 1.0 - k
    f0, w0 = wrap(theta0, 0.0)
    f1, w1 = wrap(theta1, 0.0)
    lr = 0.0
    for n in range(n0, n_end):
        if kind == 2:
            V = K1 * (math.sin(TWO_PI * f0) + math.sin(TWO_PI * f1) + 100.0) / (n - b)
        else:
            V = K1 * (math.sin(TWO_PI * f0) + 100.0) / (n - b)
        out_V[n - n0] = V
        _, f0, w0, st = step(lr, f0, w0, V, k, s)
        if st != OK:
            return st, n
        if kind == 2:
            _, f1, w1, st = step(lr, f1, w1, V, kt, s)
            if st != OK:
                return st, n
    return OK, -1


@njit(cache=True)
def sturm_count(d, x):
    """Number of eigenvalues < x of the tridiagonal matrix (diag d, offdiag 1)."""
    cnt = 0
    q = d[0] - x
    if q < 0.0:
        cnt += 1
    for i in range(1, d.shape[0]):
        if q == 0.0:
            q = 1e-300
        q = d[i] - x - 1.0 / q
        if q < 0.0:
            cnt += 1
    return cnt
