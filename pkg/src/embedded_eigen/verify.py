"""Independent checks on constructed potentials and their solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from . import _kernels
from .errors import DecimatedTraceError, InsufficientSpanError, OutOfHorizonError
from .model import BoundaryAngle, EnergyPoint, Potential, SolutionTrace

MIN_SAMPLES = 50


@dataclass(frozen=True)
class DecayReport:
    slope: float
    intercept: float
    residualRMS: float
    sampleRange: tuple[int, int]
    samples: int


def power_fit(x, y):
    """Least-squares ``log y = slope * log x + intercept`` on positive data."""
    lx, ly = np.log(x), y
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2)))


def decay_exponent(trace: SolutionTrace, b: int, start: int | None = None,
                   stop: int | None = None) -> DecayReport:
    """Exponent ``p`` in ``R(n) ~ (n - b)^p`` fitted on the samples in ``[start, stop]``."""
    n = trace.n
    sel = np.ones(n.size, dtype=bool)
    if start is not None:
        sel &= n >= start
    if stop is not None:
        sel &= n <= stop
    sel &= n - b > 0
    n, logR = n[sel], trace.logR[sel]
    if n.size < MIN_SAMPLES:
        raise InsufficientSpanError(f"{n.size} samples; need at least {MIN_SAMPLES}")
    if (n[-1] - b) < 10 * (n[0] - b):
        raise InsufficientSpanError("samples span less than one decade of n - b")
    slope, intercept, rms = power_fit((n - b).astype(float), logR)
    return DecayReport(slope, intercept, rms, (int(n[0]), int(n[-1])), int(n.size))


def _dense_angles(trace, n0, n_end):
    n_end = int(trace.n[-1]) if n_end is None else n_end
    if not trace.is_dense(n0, n_end):
        raise DecimatedTraceError(f"trace {trace.eigen_id} is not dense on [{n0}, {n_end}]")
    i = int(np.searchsorted(trace.n, n0))
    return trace.phi[i:i + n_end - n0 + 1], n_end


def oscillatory_sum(trace: SolutionTrace, b: int, n0: int, other: SolutionTrace | None = None,
                    n_end: int | None = None) -> tuple[float, float]:
    """Sup over ``n`` of ``|sum_{l=n0}^{n} sin 2 pi theta(l) / (l - b)|`` and that sup times ``n0 - b``.

    With ``other`` the summand is ``sin 2 pi theta(l) sin 2 pi theta_j(l) / (l - b)``.
    """
    phi, n_end = _dense_angles(trace, n0, n_end)
    term = np.sin(2.0 * np.pi * (phi - np.floor(phi)))
    if other is not None:
        phj, _ = _dense_angles(other, n0, n_end)
        term = term * np.sin(2.0 * np.pi * (phj - np.floor(phj)))
    l = np.arange(n0, n_end + 1, dtype=float)
    sup = float(np.max(np.abs(np.cumsum(term / (l - b)))))
    return sup, sup * (n0 - b)


@dataclass(frozen=True)
class L2Report:
    total: float
    lastDecadeFraction: float
    absExponent: float


def l2_report(n, u=None, *, envelope=None, log_envelope=None, cumulative=None,
              fit_from: int | None = None) -> L2Report:
    """ℓ² bookkeeping for one solution.

    Either ``u`` on consecutive sites, or ``cumulative[i] = sum_{m < n[i]} u(m)^2``
    at arbitrary sample sites.  The decay exponent is fitted to ``log|u|``
    (or of an envelope such as the Prufer radius, given directly or as its
    logarithm) against ``log n`` for ``n >= fit_from``.
    """
    n = np.asarray(n, dtype=np.int64)
    if cumulative is None:
        if u is None:
            raise ValueError("need u or cumulative sums")
        u = np.asarray(u, dtype=float)
        if n.size > 1 and np.any(np.diff(n) != 1):
            raise DecimatedTraceError("u must be given on consecutive sites")
        cum = np.concatenate([[0.0], np.cumsum(u * u)])
        last = n[-1]
        total = float(cum[-1])
        cut = int(math.ceil(last / 10.0))
        tail = total - float(cum[max(cut - n[0], 0)])
    else:
        cum = np.asarray(cumulative, dtype=float)
        last = n[-1]
        total = float(cum[-1])
        i = max(int(np.searchsorted(n, last / 10.0, side="right")) - 1, 0)
        tail = total - float(cum[i])
    frac = tail / total if total > 0 else 0.0
    start = max(int(n[0]), 1) if fit_from is None else fit_from
    if log_envelope is not None:
        logamp = np.asarray(log_envelope, dtype=float)
    elif envelope is not None:
        with np.errstate(divide="ignore"):
            logamp = np.log(np.abs(np.asarray(envelope, dtype=float)))
    else:
        with np.errstate(divide="ignore"):
            logamp = np.log(np.abs(np.asarray(u, dtype=float)))
    sel = (n >= start) & (n >= 1) & np.isfinite(logamp)
    exponent = power_fit(n[sel].astype(float), logamp[sel])[0] if sel.sum() >= 2 else math.nan
    return L2Report(total, frac, exponent)


# -- truncated operator ------------------------------------------------------

def sturm_count(diag: np.ndarray, x: float) -> int:
    """Eigenvalues ``< x`` of the tridiagonal matrix with unit off-diagonals."""
    return int(_kernels.sturm_count(np.ascontiguousarray(diag, dtype=float), float(x)))


def _bounds(diag):
    return float(np.min(diag)) - 2.0, float(np.max(diag)) + 2.0


def sturm_eigenvalue(diag: np.ndarray, j: int, tol: float = 0.0) -> float:
    """The ``j``-th smallest eigenvalue (0-based) by bisection on eigenvalue counts."""
    lo, hi = _bounds(diag)
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= tol:
            return mid
        if sturm_count(diag, mid) > j:
            hi = mid
        else:
            lo = mid


def sturm_eigenvalues(diag: np.ndarray, indices: Sequence[int] | None = None) -> np.ndarray:
    idx = range(len(diag)) if indices is None else indices
    return np.array([sturm_eigenvalue(diag, j) for j in idx])


def tridiagonal_matrix_vector(diag, x):
    y = diag * x
    y[:-1] += x[1:]
    y[1:] += x[:-1]
    return y


def inverse_iteration(diag: np.ndarray, lam: float, iters: int = 3, seed: int = 0) -> np.ndarray:
    M = diag.size
    shift = lam + 1e-13 * max(1.0, abs(lam))
    ab = np.zeros((3, M))
    ab[0, 1:] = 1.0
    ab[1] = diag - shift
    ab[2, :-1] = 1.0
    x = np.random.default_rng(seed).standard_normal(M)
    for _ in range(iters):
        x = solve_banded((1, 1), ab, x)
        x /= np.linalg.norm(x)
    return x


@dataclass(frozen=True)
class TargetSpectrum:
    E: float
    nearestEigenvalue: float
    eigenvalueIndex: int
    eigenvectorOverlap: float
    residualNorm: float


@dataclass(frozen=True)
class SpectralReport:
    truncationSize: int
    targets: list[TargetSpectrum] = field(default_factory=list)


def boundary_diagonal(V: Potential, theta: BoundaryAngle, M: int) -> tuple[np.ndarray, int]:
    """Diagonal of the ``M x M`` truncation and the first lattice site it covers.

    ``u(0) = cot(theta) u(1)`` is folded into the first entry.  ``theta = pi/2``
    is Dirichlet, and ``theta = 0`` (``u(1) = 0``) moves the lattice to start at
    site 2 with Dirichlet at site 1.
    """
    c, s = math.cos(theta.theta), math.sin(theta.theta)
    first = 2 if s == 0.0 else 1
    if M < 1 or first + M > V.horizon:
        raise OutOfHorizonError(f"truncation {M} needs sites up to {first + M - 1} < horizon {V.horizon}")
    diag = V.values(first, first + M).copy()
    if first == 1 and abs(c) > 1e-15:
        diag[0] += c / s
    return diag, first


def constructed_solution(V: Potential, theta: BoundaryAngle, E: float, stop: int) -> np.ndarray:
    """``u(0..stop)`` from the plain transfer recursion."""
    Vv = V.values(0, min(stop, V.horizon))
    u = np.empty(stop + 1)
    u[0], u[1] = math.cos(theta.theta), math.sin(theta.theta)
    for n in range(1, stop):
        u[n + 1] = (E - Vv[n]) * u[n] - u[n - 1]
        if abs(u[n + 1]) > 1e250:
            u[: n + 2] *= 1e-250
    return u


def truncated_spectrum(V: Potential, theta, M: int, targets: Sequence[EnergyPoint]) -> SpectralReport:
    """Nearest truncated eigenvalue, eigenvector overlap and residual per target.

    ``theta`` is one :class:`BoundaryAngle` for all targets or one per target.
    """
    thetas = [theta] * len(targets) if isinstance(theta, BoundaryAngle) else list(theta)
    if len(thetas) != len(targets):
        raise ValueError("one boundary angle per target")
    out = []
    cache = {}
    for th, ep in zip(thetas, targets):
        if th.theta not in cache:
            cache[th.theta] = boundary_diagonal(V, th, M)
        diag, first = cache[th.theta]
        u = constructed_solution(V, th, ep.E, first + M)[first:first + M]
        below = sturm_count(diag, ep.E)
        cands = [j for j in (below - 1, below) if 0 <= j < M]
        lams = [sturm_eigenvalue(diag, j) for j in cands]
        best = int(np.argmin([abs(l - ep.E) for l in lams]))
        lam, j = lams[best], cands[best]
        vec = inverse_iteration(diag, lam)
        un = np.linalg.norm(u)
        overlap = float(abs(vec @ u) / un)
        resid = float(np.linalg.norm(tridiagonal_matrix_vector(diag, u) - ep.E * u) / un)
        out.append(TargetSpectrum(ep.E, lam, j, min(overlap, 1.0), resid))
    return SpectralReport(M, out)


def envelope_violations(V: Potential, h, start: int) -> tuple[int, float]:
    """Count of sites ``n >= start`` with ``|V(n)| > h(n)/(1+n)`` and the worst ratio."""
    bad, worst = 0, 0.0
    for p in V.pieces:
        lo, hi = max(p.start, start), p.end
        if lo >= hi:
            continue
        n = np.arange(lo, hi, dtype=float)
        ratio = np.abs(p.values[lo - p.start:]) * (1.0 + n) / h(n)
        bad += int(np.count_nonzero(ratio > 1.0))
        worst = max(worst, float(np.max(ratio)))
    return bad, worst
