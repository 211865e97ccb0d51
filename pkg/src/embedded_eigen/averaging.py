"""Block lengths over which trigonometric averages along ``l -> l k`` cancel.

For a block of length ``N`` the average ``(1/N) sum_l cos(theta + x l)`` with
``x = nu pi k`` has modulus ``|sin(N x / 2) / (N sin(x / 2))|`` once maximised
over ``theta``; the same holds for the sine average and for either sign of
``x``.  Certification measures the averages on a grid of ``theta`` values and
checks them against that closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NoBlockFoundError, ResonantBlockDegenerateError
from .model import EnergyPoint

GRID_POINTS = 720
RATIONAL_TOL = 1e-12
NMAX = 10_000


@dataclass(frozen=True)
class BlockChoice:
    N: int
    epsilon: float
    certifiedBound: float


def trig_average(theta, k, nu, sign, N):
    """``(1/N) sum_{l<N} cos(theta + sign nu pi k l)``; ``theta`` may be an array."""
    l = np.arange(N)
    th = np.asarray(theta, dtype=float)[..., None]
    return np.cos(th + sign * nu * np.pi * k * l).mean(axis=-1)


def trig_average_sin(theta, k, nu, sign, N):
    l = np.arange(N)
    th = np.asarray(theta, dtype=float)[..., None]
    return np.sin(th + sign * nu * np.pi * k * l).mean(axis=-1)


def dirichlet_modulus(x, N):
    """``|sin(N x/2) / (N sin(x/2))|``, the sup over theta of the block average."""
    N = np.asarray(N)
    # the modulus has period pi in x/2; reducing first keeps the 0/0 limit at
    # nonzero multiples of 2 pi from being evaluated on rounding noise
    y = 0.5 * np.asarray(x, dtype=float)
    y = y - np.pi * np.round(y / np.pi)
    num = np.sin(N * y)
    den = N * np.sin(y)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.abs(num / den)
    return np.where(np.abs(y) < 1e-300, 1.0, out)


def required_combinations(pair: bool) -> list[tuple[int, int]]:
    """The (nu, sign) frequencies a generating block has to average out."""
    if pair:
        return [(4, 1), (2, 1), (4, -1), (2, -1)]
    return [(4, 1), (2, 1)]


def continued_fraction(x: float, terms: int = 40) -> list[int]:
    out = []
    for _ in range(terms):
        a = math.floor(x)
        out.append(a)
        frac = x - a
        if frac < 1e-15:
            break
        x = 1.0 / frac
        if x > 1e16:
            break
    return out


def convergents(x: float, terms: int = 40) -> list[Fraction]:
    p0, q0, p1, q1 = 0, 1, 1, 0
    out = []
    for a in continued_fraction(x, terms):
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        out.append(Fraction(p1, q1))
    return out


def rational_approximation(k: float, qmax: int, tol: float = RATIONAL_TOL) -> Fraction | None:
    """The convergent ``p/q`` of ``k`` with ``q <= qmax`` and ``|k - p/q| <= tol``."""
    for f in convergents(k):
        if f.denominator > qmax:
            break
        if abs(k - f.numerator / f.denominator) <= tol:
            return f
    return None


def measured_sup(k: float, N: int, combos, grid: int = GRID_POINTS) -> float:
    """Largest |average| over a theta grid, every combination and cos/sin."""
    theta = np.linspace(0.0, 2.0 * np.pi, grid, endpoint=False)
    best = 0.0
    for nu, sign in combos:
        best = max(best,
                   float(np.max(np.abs(trig_average(theta, k, nu, sign, N)))),
                   float(np.max(np.abs(trig_average_sin(theta, k, nu, sign, N)))))
    return best


def _degenerate(k, combos):
    # the rotation nu*pi*k is a multiple of 2 pi: every term equals the first
    return [(nu, sg) for nu, sg in combos
            if abs(0.5 * nu * k - round(0.5 * nu * k)) <= RATIONAL_TOL]


def choose_block_length(ep: EnergyPoint, epsilon: float | None = None, Nmax: int = NMAX,
                        pair: bool = True) -> BlockChoice:
    """Smallest block length whose averages are all below ``epsilon``.

    ``epsilon`` defaults to ``sin(pi k) / 8e4``.  A quasimomentum within
    ``1e-12`` of ``p/q`` with ``q <= Nmax`` gets ``N = q`` directly.
    """
    k = ep.k
    eps = ep.s / 8e4 if epsilon is None else float(epsilon)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    combos = required_combinations(pair)
    bad = _degenerate(k, combos)
    if bad:
        raise ResonantBlockDegenerateError(f"k = {k!r}: averages for {bad} never decay")
    frac = rational_approximation(k, Nmax)
    if frac is not None:
        N = frac.denominator
        bound = max(measured_sup(k, N, combos),
                    max(float(dirichlet_modulus(nu * np.pi * k, N)) for nu, _ in combos))
        if bound <= eps:
            return BlockChoice(N, eps, bound)
    Ns = np.arange(1, Nmax + 1)
    closed = np.max([dirichlet_modulus(nu * np.pi * k, Ns) for nu in {nu for nu, _ in combos}], axis=0)
    for N in Ns[closed <= eps]:
        bound = max(measured_sup(k, int(N), combos), float(closed[N - 1]))
        if bound <= eps:
            return BlockChoice(int(N), eps, bound)
    raise NoBlockFoundError(f"no block length <= {Nmax} brings the averages for k={k!r} below {eps:g}")
