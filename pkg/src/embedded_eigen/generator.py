"""Generating potentials that force one eigenvalue (or a resonant pair) to decay.

For a pair ``E, -E`` (quasimomenta ``k`` and ``1 - k``) the potential is

    V(n) = K1 (sin 2 pi theta(n) + sin 2 pi theta~(n) + 100) / (n - b),

and for a single energy the second sine is dropped.  ``V(n)`` is computed from
the angles at site ``n`` and then both angles are advanced with that same
value, so the construction is an explicit forward recursion.

Desk-scale constants
--------------------
The averaged decrement of ``ln R^2`` is ``K1 / (2 s)`` per unit of
``ln(n - b)``, so ``R`` decays like ``(n - b)^(-K1 / (4 s))``.
``GeneratorParams.for_target`` picks ``K1 = 4 s p`` for a requested exponent
``p``.  It sizes ``K2`` so that ``|V| / s <= 1/10`` from the first site on:
``K2 = 1020 K1 / s_min``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .averaging import choose_block_length
from .errors import (
    HorizonTooShortError,
    ParameterError,
    ResonantHypothesisError,
    StepTooLargeError,
)
from .model import (
    DUPLICATE_TOL,
    EnergyPoint,
    PieceKind,
    PotentialPiece,
    PruferState,
    SolutionTrace,
)

K2_FACTOR = 1020.0  # 102 (sup of the bracket) * 10 (keeps |V|/s <= 1/10)
DEFAULT_EXPONENT = 5.0
MAX_SAMPLES = 100_000


def partner_point(ep: EnergyPoint) -> EnergyPoint:
    """The resonant partner ``-E`` with quasimomentum exactly ``1 - k``."""
    return EnergyPoint(-ep.E, 1.0 - ep.k, ep.s)


def is_zero_energy(ep: EnergyPoint) -> bool:
    return abs(ep.E) <= DUPLICATE_TOL


@dataclass(frozen=True)
class GeneratorParams:
    K1: float
    K2: float
    N: int
    b: int
    horizon: int
    targetExponent: float = DEFAULT_EXPONENT

    def __post_init__(self):
        if not self.K1 > 0 or not self.K2 > 0 or self.N < 1:
            raise ParameterError("K1, K2 must be positive and N >= 1")

    @classmethod
    def for_target(cls, ep: EnergyPoint, A: Sequence[EnergyPoint] = (), *, n0: int,
                   horizon: int, target_exponent: float = DEFAULT_EXPONENT,
                   b: int | None = None, block_epsilon: float = 0.01) -> "GeneratorParams":
        """Desk-scale parameters for a target exponent.

        ``b`` defaults to ``n0 - K2``, the largest shift allowed at ``n0``.
        ``N`` only sets the cadence of the block diagnostics; it is certified
        at ``block_epsilon`` rather than the much smaller default tolerance.
        """
        K1 = 4.0 * ep.s * target_exponent
        s_min = min([ep.s] + [a.s for a in A])
        K2 = math.ceil(K2_FACTOR * K1 / s_min)
        if is_zero_energy(ep):
            N = 2
        else:
            N = choose_block_length(ep, block_epsilon).N
        return cls(K1=K1, K2=K2, N=N, b=n0 - K2 if b is None else b,
                   horizon=horizon, targetExponent=target_exponent)


@dataclass(frozen=True)
class BlockRecord:
    m: int
    n: int
    delta: float
    eps: float


@dataclass
class PieceRun:
    """Raw output of one run of the generating recursion."""

    start: int
    end: int
    values: np.ndarray
    states: dict[int, PruferState]
    u2: dict[int, float]
    samples: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]


@dataclass
class GeneratedPiece:
    piece: PotentialPiece
    params: GeneratorParams
    targetTraces: list[SolutionTrace]
    bystanderTraces: list[SolutionTrace]
    diagnostics: list[BlockRecord] = field(default_factory=list)
    final_states: dict[int, PruferState] = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return self.piece.values


def run_piece(kind: PieceKind, ep: EnergyPoint, n0: int, n_end: int, b: int, K1: float,
              targets: Sequence[tuple[int, PruferState]],
              bystanders: Sequence[tuple[int, EnergyPoint, PruferState]],
              u2: dict[int, float] | None = None, samples: np.ndarray | None = None,
              stop_log_drop: float = 0.0, min_len: int = 0) -> PieceRun:
    """Run the recursion on ``[n0, n_end)``, optionally stopping early.

    Early stopping (``stop_log_drop > 0``) ends the piece at the first site
    where every target's ``ln R`` has dropped by ``stop_log_drop`` and at least
    ``min_len`` sites were emitted.
    """
    if n_end <= n0:
        raise HorizonTooShortError(f"horizon {n_end} <= start {n0}")
    code = 1 if kind is PieceKind.SINGLE else 2
    if len(targets) != code:
        raise ValueError("target count does not match the piece kind")
    u2 = dict(u2 or {})
    samples = np.zeros(0, dtype=np.int64) if samples is None else np.asarray(samples, dtype=np.int64)
    tgt_points = [ep, partner_point(ep)][:code]
    rows = [(i, p, st) for (i, st), p in zip(targets, tgt_points)] + list(bystanders)
    ids = [i for i, _, _ in rows]
    ks = np.array([p.k for _, p, _ in rows])
    ss = np.array([p.s for _, p, _ in rows])
    lr = np.array([st.logR for _, _, st in rows])
    f = np.array([st.frac for _, _, st in rows])
    w = np.array([float(st.winding) for _, _, st in rows])
    acc = np.array([u2.get(i, 0.0) for i in ids])
    out_V = np.zeros(n_end - n0)
    shape = (len(rows), samples.size)
    out_logR, out_phi, out_u2 = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    stop, status, fail = _kernels.generate(
        code, n0, n_end, b, K1, ks, ss, lr, f, w, acc, float(stop_log_drop), int(min_len),
        samples, out_V, out_logR, out_phi, out_u2)
    if status != _kernels.OK:
        raise StepTooLargeError(f"|V|/sin(pi k) reached 1/2 at site {fail}")
    states = {i: PruferState(float(lr[r]), float(f[r]), int(w[r])) for r, i in enumerate(ids)}
    u2_out = {i: float(acc[r]) for r, i in enumerate(ids)}
    keep = samples <= stop
    recorded = {i: (samples[keep], out_logR[r, keep], out_phi[r, keep], out_u2[r, keep])
                for r, i in enumerate(ids)}
    return PieceRun(n0, int(stop), out_V[:stop - n0].copy(), states, u2_out, recorded)


def default_samples(n0: int, n_end: int, N: int = 1, per_decade: int = 2000,
                    dense_window: tuple[int, int] | None = None,
                    max_samples: int = MAX_SAMPLES) -> np.ndarray:
    """Log-spaced sites plus block-boundary pairs and an optional dense window."""
    decades = max(math.log10(max(n_end, 2) / max(n0, 1)), 1e-3)
    count = min(max_samples // 2, max(50, int(per_decade * decades)))
    grid = np.unique(np.geomspace(max(n0, 1), n_end, count).astype(np.int64))
    m = np.unique((grid - n0) // N)
    blocks = np.concatenate([n0 + m * N, n0 + (m + 1) * N])
    parts = [grid, blocks, [n0, n_end]]
    if dense_window is not None:
        lo, hi = max(dense_window[0], n0), min(dense_window[1], n_end)
        parts.append(np.arange(lo, hi + 1))
    s = np.unique(np.concatenate(parts).astype(np.int64))
    return s[(s >= n0) & (s <= n_end)]


def _check_hypotheses(ep, A, n0, params, pair):
    if params.horizon <= n0:
        raise HorizonTooShortError(f"horizon {params.horizon} <= n0 {n0}")
    for a in A:
        if abs(a.E - ep.E) <= DUPLICATE_TOL or abs(a.E + ep.E) <= DUPLICATE_TOL:
            raise ResonantHypothesisError(f"{a.E!r} coincides with the target or its partner")
    if pair and is_zero_energy(ep):
        raise ResonantHypothesisError("E = 0 is its own partner; use generate_single")
    if n0 - params.b < params.K2:
        raise ParameterError(f"n0 - b = {n0 - params.b} < K2 = {params.K2}")
    s_min = min([ep.s] + [a.s for a in A])
    if 102.0 * params.K1 / ((n0 - params.b) * s_min) > 0.1:
        raise ParameterError("K2 too small: |V|/sin(pi k) would exceed 1/10 at n0")


def _traces(run: PieceRun, points: dict[int, EnergyPoint]) -> dict[int, SolutionTrace]:
    return {i: SolutionTrace(i, points[i], *run.samples[i]) for i in run.samples}


def _generate(kind, ep, A, n0, angles, params, logRs, bystander_states, samples, dense_window):
    pair = kind is PieceKind.PAIR
    _check_hypotheses(ep, A, n0, params, pair)
    if samples is None:
        samples = default_samples(n0, params.horizon, params.N, dense_window=dense_window)
    tgt_points = [ep, partner_point(ep)] if pair else [ep]
    targets = [(i, PruferState(lr, th)) for i, (lr, th) in enumerate(zip(logRs, angles))]
    first = len(targets)
    states = list(bystander_states) if bystander_states is not None else [PruferState(0.0, 0.25)] * len(A)
    if len(states) != len(A):
        raise ValueError("one bystander state per element of A is required")
    bystanders = [(first + j, a, st) for j, (a, st) in enumerate(zip(A, states))]
    run = run_piece(kind, ep, n0, params.horizon, params.b, params.K1, targets, bystanders,
                    samples=samples)
    points = {i: p for i, p in enumerate(tgt_points)}
    points.update({i: a for i, a, _ in bystanders})
    traces = _traces(run, points)
    anchors = {i: st.frac for i, st in targets}
    anchors.update({i: st.frac for i, _, st in bystanders})
    piece = PotentialPiece(n0, run.end, kind, energy=ep, K1=params.K1, b=params.b,
                           targets=tuple(i for i, _ in targets), anchors=anchors)
    piece.__dict__["values"] = _frozen(run.values)
    tt = [traces[i] for i, _ in targets]
    gen = GeneratedPiece(piece, params, tt, [traces[i] for i, _, _ in bystanders],
                         final_states=run.states)
    gen.diagnostics = block_diagnostics(tt, params, n0)
    return gen


def _frozen(a):
    a = np.array(a)
    a.flags.writeable = False
    return a


def generate_pair(E: EnergyPoint, A: Sequence[EnergyPoint], n0: int, theta0: float,
                  thetaTilde0: float, params: GeneratorParams, *, logR0: float = 0.0,
                  logRTilde0: float = 0.0, bystander_states: Sequence[PruferState] | None = None,
                  samples: np.ndarray | None = None,
                  dense_window: tuple[int, int] | None = None) -> GeneratedPiece:
    """Generating piece for the resonant pair ``E, -E`` (``E > 0``).

    Trace ids: 0 is ``E``, 1 is ``-E``, bystanders follow in the order of ``A``.
    """
    if not E.E > 0:
        raise ResonantHypothesisError("the pair is keyed by its positive member")
    return _generate(PieceKind.PAIR, E, A, n0, (theta0, thetaTilde0), params,
                     (logR0, logRTilde0), bystander_states, samples, dense_window)


def generate_single(E: EnergyPoint, A: Sequence[EnergyPoint], n0: int, theta0: float,
                    params: GeneratorParams, *, logR0: float = 0.0,
                    bystander_states: Sequence[PruferState] | None = None,
                    samples: np.ndarray | None = None,
                    dense_window: tuple[int, int] | None = None) -> GeneratedPiece:
    """Single-angle generating piece; trace id 0 is ``E``, bystanders follow."""
    return _generate(PieceKind.SINGLE, E, A, n0, (theta0,), params, (logR0,),
                     bystander_states, samples, dense_window)


def block_diagnostics(traces: Sequence[SolutionTrace], params: GeneratorParams,
                      n0: int) -> list[BlockRecord]:
    """Effective per-block errors ``delta(m)`` and ``eps(m)``.

    Consecutive samples ``n0 + mN`` and ``n0 + (m+1)N`` are matched against

        ln F(next)^2 = ln F^2 - K/(2 (n - b) s) (1 - cos 2 pi phi + delta)
        phi(next)    = phi + L + K/((n - b) pi s) (100 + eps)

    with ``F = R`` of the first trace.  For a pair ``phi = theta + theta~``,
    ``L = N`` and ``K = K1 N``.  For ``E = 0`` (block 2), ``phi = 2 theta``,
    ``L = 2`` and ``K = 2 K1``.  A single non-resonant energy has no slow
    phase; its ``delta`` is measured against a bracket of 1 and ``eps`` is NaN.
    """
    if not params.K1 > 0:
        raise ParameterError("block diagnostics need K1 > 0")
    tr = traces[0]
    ep = tr.energy
    N, b, s = params.N, params.b, ep.s
    pair = len(traces) > 1
    zero = not pair and abs(ep.k - 0.5) < 1e-12
    if pair and not np.array_equal(traces[1].n, tr.n):
        raise ValueError("pair traces must share their sample sites")
    if zero:
        N = 2
    n = tr.n
    on_grid = (n - n0) % N == 0
    idx = {int(v): i for i, v in enumerate(n) if on_grid[i]}
    if pair:
        phi = tr.phi + traces[1].phi
        L, K = N, params.K1 * N
    elif zero:
        phi = 2.0 * tr.phi
        L, K = 2, 2.0 * params.K1
    else:
        phi = None
        L, K = N, params.K1 * N
    out = []
    for v, i in idx.items():
        j = idx.get(v + N)
        if j is None:
            continue
        scale = K / (2.0 * (v - b) * s)
        dlog2 = 2.0 * (tr.logR[j] - tr.logR[i])
        if phi is None:
            delta = -dlog2 / scale - 1.0
            eps = math.nan
        else:
            delta = -dlog2 / scale - (1.0 - math.cos(2.0 * math.pi * phi[i]))
            eps = (phi[j] - phi[i] - L) * (v - b) * math.pi * s / K - 100.0
        out.append(BlockRecord((v - n0) // N, v, float(delta), float(eps)))
    return out
