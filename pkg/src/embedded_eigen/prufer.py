"""Modified Prufer transformation for ``u(n+1) + u(n-1) + V(n) u(n) = E u(n)``.

With ``E = 2 cos(pi k)`` and ``s = sin(pi k)`` the solution pair is mapped to

    Y(n) = (u(n-1), (u(n) - cos(pi k) u(n-1)) / s)
         = R(n) (sin(pi theta(n) - pi k), cos(pi theta(n) - pi k)),

so that ``u(n) = R(n) sin(pi theta(n))``.  The angle is kept unwrapped (as
a fraction in ``[0, 2)`` plus a winding count).  Its direction vector has
period 2, and a boundary angle is represented in ``[0, 2)`` so the map back
to ``(u(n-1), u(n))`` keeps the sign of ``u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import _kernels
from .errors import StepTooLargeError
from .model import BoundaryAngle, EnergyPoint, PruferState


@dataclass(frozen=True)
class SolutionPair:
    """``(u(n-1), u(n))`` for some site ``n``."""

    uPrev: float
    uCur: float

    def __post_init__(self):
        if self.uPrev == 0.0 and self.uCur == 0.0:
            raise ValueError("trivial solution")


def transfer_step(p: SolutionPair, V: float, E: float) -> SolutionPair:
    return SolutionPair(p.uCur, (E - V) * p.uCur - p.uPrev)


def solution_to_prufer(p: SolutionPair, ep: EnergyPoint) -> PruferState:
    """Prufer variables of a solution pair, angle in ``[0, 2)``."""
    y1 = p.uPrev
    y2 = (p.uCur - ep.c * p.uPrev) / ep.s
    phi = ep.k + math.atan2(y1, y2) / math.pi
    phi = phi - 2.0 * math.floor(0.5 * phi)
    return PruferState(math.log(math.hypot(y1, y2)), phi)


def boundary_to_prufer(theta: BoundaryAngle, ep: EnergyPoint) -> PruferState:
    """Prufer state at ``n = 1`` for ``u(0) = cos(theta)``, ``u(1) = sin(theta)``."""
    return solution_to_prufer(SolutionPair(math.cos(theta.theta), math.sin(theta.theta)), ep)


def prufer_to_solution(st: PruferState, ep: EnergyPoint) -> SolutionPair:
    a = math.pi * _kernels.reduce2(st.frac) - math.pi * ep.k
    R = math.exp(st.logR)
    prev = R * math.sin(a)
    return SolutionPair(prev, ep.s * R * math.cos(a) + ep.c * prev)


def prufer_step(st: PruferState, V: float, ep: EnergyPoint) -> PruferState:
    """Advance one site with the exact radius/angle recursions.

    Raises
    ------
    StepTooLargeError
        If ``|V| / sin(pi k) >= 1/2``; outside that range the angle branch
        is no longer pinned by the one-step bound.
    """
    logR, f, w, status = _kernels.step(st.logR, st.frac, float(st.winding), float(V), ep.k, ep.s)
    if status != _kernels.OK:
        raise StepTooLargeError(f"|V|/sin(pi k) = {abs(V) / ep.s:.3g} >= 1/2")
    return PruferState(logR, f, int(w))


def predicted_angle_increment(st: PruferState, V: float, ep: EnergyPoint) -> float:
    """Second-order-accurate increment ``k + sin^2(pi phi) V / (pi s)``."""
    if not abs(V) / ep.s < 0.1:
        raise StepTooLargeError(f"|V|/sin(pi k) = {abs(V) / ep.s:.3g} >= 1/10")
    sp = math.sin(math.pi * _kernels.reduce2(st.frac))
    return ep.k + sp * sp * V / (math.pi * ep.s)
