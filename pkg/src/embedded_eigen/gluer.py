"""Piecewise assembly of a potential with many embedded eigenvalues.

Step ``r`` runs one generating piece per active resonance class, each of
the common length ``T_r``, so ``J_r = J_{r-1} + N_r T_r``.  Every
eigenvalue's Prufer state is threaded through every piece, targeted or
not, so the boundary conditions at ``n = 0`` hold for all of them.

Every piece uses one global shift ``b = initialGap - K2``.  A shift that
followed the step start would make ``|V(n)| (1 + n)`` grow like ``J_r``.
With the global shift ``|V(n)| <= 102 K1 / (n - b) <= 102 K1 / (1 + n)``,
and ``|V| / sin(pi k) <= 1/10`` holds for every eigenvalue from the first
piece on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import (
    EnvelopeNeverFitsError,
    HorizonTooShortError,
    ParameterError,
    StepTooLargeError,
)
from .generator import DEFAULT_EXPONENT, K2_FACTOR, partner_point, run_piece
from .model import (
    EDGE_DELTA,
    BoundaryAngle,
    EnergyPoint,
    PieceKind,
    Potential,
    PotentialPiece,
    PruferState,
    SolutionTrace,
    make_energy_point,
    resonance_classes,
)
from .prufer import boundary_to_prufer
from .verify import L2Report, l2_report

FINITE = "finite"
COUNTABLE = "countable"
MAX_SITE = 10 ** 15


# -- envelopes ---------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    """Non-decreasing unbounded ``h`` for the bound ``|V(n)| <= h(n)/(1+n)``.

    ``log``: ``log(2 + n)``; ``power``: ``(1 + n)^alpha``; ``table``: linear
    interpolation through ``(n, h)`` pairs, continued past the last point
    with the last slope.
    """

    name: str
    alpha: float = 0.0
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.name == "power" and not self.alpha > 0:
            raise ParameterError("power envelope needs alpha > 0")
        if self.name == "table":
            n = np.array([p[0] for p in self.table], dtype=float)
            h = np.array([p[1] for p in self.table], dtype=float)
            if n.size < 2 or np.any(np.diff(n) <= 0):
                raise ParameterError("envelope table needs >= 2 points with increasing n")
            if np.any(np.diff(h) < 0) or not h[-1] > h[-2]:
                raise ParameterError("envelope table must be non-decreasing and end increasing")
        elif self.name not in ("log", "power"):
            raise ParameterError(f"unknown envelope {self.name!r}")
        self.check()

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        if self.name == "log":
            return np.log(2.0 + n)
        if self.name == "power":
            return (1.0 + n) ** self.alpha
        tn = np.array([p[0] for p in self.table])
        th = np.array([p[1] for p in self.table])
        slope = (th[-1] - th[-2]) / (tn[-1] - tn[-2])
        return np.where(n <= tn[-1], np.interp(n, tn, th), th[-1] + slope * (n - tn[-1]))

    def check(self, points: int = 2000) -> None:
        """Monotonicity and growth on a log-spaced sample of sites."""
        n = np.unique(np.geomspace(1, 1e12, points).astype(np.int64))
        h = self(n)
        if np.any(np.diff(h) < 0):
            raise ParameterError("envelope is not non-decreasing")
        if not h[-1] > h[0]:
            raise ParameterError("envelope does not grow")

    def to_dict(self) -> dict:
        d = {"name": self.name}
        if self.name == "power":
            d["alpha"] = self.alpha
        if self.name == "table":
            d["table"] = [list(p) for p in self.table]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Envelope":
        return cls(d["name"], float(d.get("alpha", 0.0)),
                   tuple((float(a), float(b)) for a, b in d.get("table", ())))


# -- plan ----------------------------------------------------------------------

@dataclass(frozen=True)
class ClassPlan:
    ids: tuple[int, ...]
    kind: PieceKind
    K1: float
    activation: int

    @property
    def representative(self) -> int:
        return self.ids[0]


@dataclass(frozen=True)
class GluingPlan:
    energies: tuple[EnergyPoint, ...]
    angles: tuple[BoundaryAngle, ...]
    classes: tuple[ClassPlan, ...]
    mode: str = FINITE
    envelope: Envelope | None = None
    stopFactor: float = 8.0
    initialGap: int = 1
    K2: int = 1
    targetExponent: float = DEFAULT_EXPONENT
    minPieceLength: int = 1
    maxPieceRatio: float | None = None
    edge: float = EDGE_DELTA
    samplesPerDecade: int = 2000

    def __post_init__(self):
        if not self.stopFactor > 1:
            raise ParameterError("stopFactor must exceed 1")
        if not self.classes:
            raise ParameterError("no energies to embed")
        if self.mode == COUNTABLE and self.envelope is None:
            raise ParameterError("countable mode needs an envelope")
        if self.initialGap < 1:
            raise ParameterError("initialGap must be at least 1")

    @property
    def b(self) -> int:
        return self.initialGap - self.K2

    def to_meta(self) -> dict:
        return {
            "energies": [e.E for e in self.energies],
            "angles": [a.theta for a in self.angles],
            "mode": self.mode,
            "envelope": None if self.envelope is None else self.envelope.to_dict(),
            "stopFactor": self.stopFactor,
            "initialGap": self.initialGap,
            "K2": self.K2,
            "b": self.b,
            "targetExponent": self.targetExponent,
            "minPieceLength": self.minPieceLength,
            "maxPieceRatio": self.maxPieceRatio,
            "edge": self.edge,
            "samplesPerDecade": self.samplesPerDecade,
            "classes": [{"ids": list(c.ids), "kind": c.kind.value, "K1": c.K1,
                         "activation": c.activation} for c in self.classes],
        }


def canonical_points(energies: Sequence[float], edge: float = EDGE_DELTA) -> list[EnergyPoint]:
    """Energy points with every ``-E`` partner given quasimomentum ``1 - k`` exactly."""
    pts = [make_energy_point(float(E), edge) for E in energies]
    for cls in resonance_classes(pts):
        if len(cls) == 2:
            i = next(j for j, p in enumerate(pts) if p is cls[1])
            pts[i] = partner_point(cls[0])
    return pts


def _sup_ratio(n: int, b: int) -> float:
    # sup over m >= n of (1 + m) / (m - b)
    return 1.0 if b <= -1 else (1.0 + n) / (n - b)


def activation_site(K1: float, envelope: Callable, b: int, start: int,
                    max_site: int = MAX_SITE) -> int:
    """First ``n >= start`` with ``h(n) >= 102 K1 sup_{m >= n} (1 + m) / (m - b)``.

    Since ``h`` is non-decreasing this guarantees ``102 K1 / (m - b) <= h(m) / (1 + m)``
    for every ``m >= n``.  The condition is monotone in ``n``, so a doubling
    search plus bisection finds it.
    """
    def ok(n):
        return float(envelope(n)) >= 102.0 * K1 * _sup_ratio(n, b)

    if ok(start):
        return start
    hi = max(start, 1)
    while not ok(hi):
        if hi >= max_site:
            raise EnvelopeNeverFitsError(
                f"h stays below {102.0 * K1:g} up to site {max_site}; use a smaller K1")
        hi = min(2 * hi, max_site)
    lo = start
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def plan(energies: Sequence[float], angles: Sequence, mode: str = FINITE, *,
         envelope: Envelope | None = None, target_exponent: float = DEFAULT_EXPONENT,
         stop_factor: float = 8.0, initial_gap: int | None = None,
         min_piece_length: int = 1, max_piece_ratio: float | None = None,
         k1: Sequence[float] | None = None, k1_ladder: float = 2.0,
         edge: float = EDGE_DELTA, samples_per_decade: int = 2000,
         max_site: int = MAX_SITE) -> GluingPlan:
    """Group energies into resonance classes and fix the per-class constants.

    Finite mode uses ``K1 = 4 s p`` per class (``p = target_exponent``).
    Countable mode keeps the constants small so each class fits the envelope
    early: ``102 K1_j = k1_ladder (j + 1)`` for the ``j``-th class.  ``k1``
    overrides both with one value per class.  ``K2`` is shared by all
    pieces: ``ceil(1020 max K1 / min s)`` over every energy.
    """
    if len(energies) != len(angles):
        raise ParameterError("one boundary angle per energy is required")
    if mode not in (FINITE, COUNTABLE):
        raise ParameterError(f"unknown mode {mode!r}")
    if mode == COUNTABLE and envelope is None:
        raise ParameterError("countable mode needs an envelope")
    pts = canonical_points(energies, edge)
    angs = tuple(a if isinstance(a, BoundaryAngle) else BoundaryAngle(float(a)) for a in angles)
    groups = resonance_classes(pts)
    index = {id(p): i for i, p in enumerate(pts)}
    ids = []
    for g in groups:
        rep = index[id(g[0])]
        if len(g) == 2:
            partner = next(j for j, p in enumerate(pts) if j != rep and p.E == -pts[rep].E)
            ids.append((rep, partner))
        else:
            ids.append((rep,))
    if k1 is not None:
        if len(k1) != len(groups):
            raise ParameterError("one K1 per resonance class is required")
        K1s = [float(x) for x in k1]
    elif mode == FINITE:
        K1s = [4.0 * pts[c[0]].s * target_exponent for c in ids]
    else:
        K1s = [k1_ladder * (j + 1) / 102.0 for j in range(len(ids))]
    if any(not x > 0 for x in K1s):
        raise ParameterError("K1 must be positive")
    s_min = min(p.s for p in pts)
    K2 = int(math.ceil(K2_FACTOR * max(K1s) / s_min))
    gap = 1 if initial_gap is None else int(initial_gap)
    b = gap - K2
    classes = []
    for c, K1 in zip(ids, K1s):
        kind = PieceKind.PAIR if len(c) == 2 else PieceKind.SINGLE
        act = gap if mode == FINITE else activation_site(K1, envelope, b, gap, max_site)
        classes.append(ClassPlan(c, kind, K1, act))
    if mode == COUNTABLE:
        # enumeration order is the activation order
        acts = [c.activation for c in classes]
        for j in range(1, len(classes)):
            acts[j] = max(acts[j], acts[j - 1])
        classes = [ClassPlan(c.ids, c.kind, c.K1, a) for c, a in zip(classes, acts)]
    return GluingPlan(tuple(pts), angs, tuple(classes), mode, envelope, float(stop_factor), gap,
                      K2, float(target_exponent), int(min_piece_length),
                      None if max_piece_ratio is None else float(max_piece_ratio), float(edge),
                      int(samples_per_decade))


# -- threading ------------------------------------------------------------------

def boundary_thread(states: Mapping[int, PruferState], piece: PotentialPiece,
                    points: Mapping[int, EnergyPoint], u2: Mapping[int, float] | None = None,
                    samples: np.ndarray | None = None):
    """Advance every state through ``piece`` under its values of ``V``.

    States are aligned at ``max(piece.start, 1)`` (the Prufer state of the
    boundary condition lives at site 1, so ``V(0)`` is never used).  Returns
    ``(states, u2, recorded)`` where ``recorded[i]`` holds the
    ``(n, logR, phi, u2cum)`` samples at the requested sites in
    ``[start, end)``.
    """
    first = max(piece.start, 1)
    V = np.ascontiguousarray(piece.values[first - piece.start:])
    u2 = dict(u2 or {})
    samples = np.zeros(0, dtype=np.int64) if samples is None else np.asarray(samples, dtype=np.int64)
    samples = samples[(samples >= first) & (samples < piece.end)]
    cuts = np.concatenate([samples, [piece.end]]) - first
    out_states, recorded = {}, {}
    for i, st in states.items():
        ep = points[i]
        logR, f, w, acc = st.logR, st.frac, float(st.winding), u2.get(i, 0.0)
        ns, lr, ph, cu = [], [], [], []
        pos = 0
        for c in cuts:
            if c > pos:
                logR, f, w, acc, status, bad = _kernels.advance(logR, f, w, V[pos:c], ep.k, ep.s, acc)
                if status != _kernels.OK:
                    raise StepTooLargeError(f"eigenvalue {i}: |V|/s reached 1/2 at site {first + pos + bad}")
                pos = c
            if c < V.size:
                ns.append(first + c)
                lr.append(logR)
                ph.append(f + 2.0 * w)
                cu.append(acc)
        out_states[i] = PruferState(logR, f, int(w))
        u2[i] = acc
        recorded[i] = (np.array(ns, dtype=np.int64), np.array(lr), np.array(ph), np.array(cu))
    return out_states, u2, recorded


# -- build ---------------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleEntry:
    r: int
    N: int
    T: int
    J: int


@dataclass(frozen=True)
class PieceLog:
    r: int
    ids: tuple[int, ...]
    start: int
    end: int
    decay: float
    scaledSup: float

    def line(self) -> str:
        cls = "+".join(str(i) for i in self.ids)
        return (f"r={self.r} class={cls} start={self.start} end={self.end} "
                f"decay={self.decay:.6g} sup|V|(1+n)={self.scaledSup:.6g}")


@dataclass
class EigenResult:
    trace: SolutionTrace
    u: np.ndarray
    l2: L2Report


@dataclass
class GluedResult:
    plan: GluingPlan
    potential: Potential
    perEigenvalue: dict[int, EigenResult]
    scheduleLog: list[ScheduleEntry]
    pieceLog: list[PieceLog]
    horizonExhausted: bool = False
    attempts: list[int] = field(default_factory=list)

    def run_log(self) -> list[str]:
        return [p.line() for p in self.pieceLog]


class _Recorder:
    """Collects per-eigenvalue samples across pieces."""

    def __init__(self, ids):
        self.parts = {i: [] for i in ids}

    def add(self, recorded, end):
        for i, (n, lr, ph, cu) in recorded.items():
            keep = n < end
            self.parts[i].append((n[keep], lr[keep], ph[keep], cu[keep]))

    def traces(self, points, states, u2, horizon):
        out = {}
        for i, parts in self.parts.items():
            cols = [np.concatenate([p[c] for p in parts] + [tail])
                    for c, tail in enumerate(([horizon], [states[i].logR], [states[i].phi], [u2[i]]))]
            out[i] = SolutionTrace(i, points[i], *cols)
        return out


def sample_grid(horizon: int, per_decade: int, dense_window: tuple[int, int] | None = None) -> np.ndarray:
    decades = math.log10(max(horizon, 10))
    count = max(50, int(per_decade * decades))
    parts = [np.geomspace(1, horizon, count).astype(np.int64), [1, max(horizon // 10, 1), horizon]]
    if dense_window is not None:
        lo, hi = max(dense_window[0], 1), min(dense_window[1], horizon)
        parts.append(np.arange(lo, hi + 1))
    return np.unique(np.concatenate(parts).astype(np.int64))


def _slope_sup(values, start):
    n = np.arange(start, start + values.size, dtype=float)
    return float(np.max(np.abs(values) * (1.0 + n))) if values.size else 0.0


class _Builder:
    def __init__(self, plan: GluingPlan, horizon: int, samples):
        self.plan = plan
        self.H = horizon
        self.samples = samples
        self.points = dict(enumerate(plan.energies))
        self.ids = list(self.points)
        self.b = plan.b

    def run_step(self, J, T, active, states, u2, fixed=None):
        """One step from ``J``.  Returns ``(runs, states, u2, complete)``.

        ``fixed`` gives explicit piece bounds (horizon-limited final step).
        """
        p = self.plan
        runs = []
        stop_drop = math.log(p.stopFactor)
        start = J
        for l, ci in enumerate(active):
            cls = p.classes[ci]
            if fixed is not None:
                lo, hi = fixed[l]
                if lo >= hi:
                    continue
                n_end, drop, min_len = hi, 0.0, 0
            else:
                lo = start
                n_end = self.H
                if p.maxPieceRatio is not None:
                    n_end = min(n_end, lo + max(T, int(math.ceil(p.maxPieceRatio * (J - self.b)))))
                if n_end - lo < T:
                    return runs, states, u2, False
                drop, min_len = stop_drop, T
            targets = [(i, states[i]) for i in cls.ids]
            bystanders = [(i, self.points[i], states[i]) for i in self.ids if i not in cls.ids]
            smp = self.samples[(self.samples >= lo) & (self.samples <= n_end)]
            smp = np.union1d(smp, [lo])
            run = run_piece(cls.kind, self.points[cls.representative], lo, n_end, self.b, cls.K1,
                            targets, bystanders, u2, smp, drop, min_len)
            runs.append((ci, run, dict(states)))
            states = {**states, **run.states}
            u2 = {**u2, **run.u2}
            if fixed is None and run.end >= self.H and run.end - lo != T:
                return runs, states, u2, False
            start = run.end
        return runs, states, u2, True


def build(plan: GluingPlan, horizon: int, *, dense_window: tuple[int, int] | None = None,
          growth: float = 1.25) -> GluedResult:
    """Run the schedule up to ``horizon`` and assemble the potential.

    Within a step every piece first runs to its own stop condition (each
    targeted radius shrunk by ``stopFactor``).  If the lengths differ the step
    is rerun with all pieces padded to the longest one; when rerunning shifts
    a later piece's own stop past that length, the common length grows by
    ``growth``.  A step that cannot fit before the horizon is cut into
    ``N_r`` equal parts of the remaining sites (a remainder shorter than
    ``N_r`` carries ``V = 0``) and the result is flagged.
    """
    H = int(horizon)
    p = plan
    if H <= p.classes[0].activation + 1:
        raise HorizonTooShortError(f"horizon {H} leaves no room after site {p.classes[0].activation}")
    samples = sample_grid(H, p.samplesPerDecade, dense_window)
    B = _Builder(p, H, samples)
    states = {i: boundary_to_prufer(p.angles[i], B.points[i]) for i in B.ids}
    u2 = {i: math.cos(p.angles[i].theta) ** 2 for i in B.ids}
    rec = _Recorder(B.ids)
    pieces, schedule, log, attempts = [], [], [], []
    J = p.classes[0].activation

    zero = PotentialPiece(0, J, PieceKind.ZERO, anchors={i: st.frac for i, st in states.items()})
    states, u2, recorded = boundary_thread(states, zero, B.points, u2, samples)
    rec.add(recorded, J)
    pieces.append(zero)

    active: list[int] = []
    exhausted = False
    r = 0
    while J < H:
        r += 1
        nxt = len(active)
        if p.mode == FINITE:
            if not active:
                active = list(range(len(p.classes)))
        elif nxt < len(p.classes) and p.classes[nxt].activation <= J:
            active = active + [nxt]
        Nr = len(active)
        T = p.minPieceLength
        tries = 0
        while True:
            tries += 1
            runs, new_states, new_u2, complete = B.run_step(J, T, active, states, u2)
            lengths = [run.end - run.start for _, run, _ in runs]
            if not complete:
                Tp = (H - J) // Nr
                bounds = [(J + l * Tp, J + (l + 1) * Tp) for l in range(Nr)]
                runs, new_states, new_u2, _ = B.run_step(J, Tp, active, states, u2, fixed=bounds)
                exhausted = True
                T = Tp
                break
            if all(L == T for L in lengths):
                break
            longest = max(lengths)
            T = longest if tries == 1 else max(longest, int(math.ceil(T * growth)))
        attempts.append(tries)
        for ci, run, before in runs:
            cls = p.classes[ci]
            anchors = {i: st.frac for i, st in before.items()}
            piece = PotentialPiece(run.start, run.end, cls.kind, energy=B.points[cls.representative],
                                   K1=cls.K1, b=B.b, targets=cls.ids, anchors=anchors)
            frozen = np.array(run.values)
            frozen.flags.writeable = False
            piece.__dict__["values"] = frozen
            pieces.append(piece)
            for i, smp in run.samples.items():
                rec.add({i: smp}, run.end)
            decay = min(math.exp(before[i].logR - run.states[i].logR) for i in cls.ids)
            log.append(PieceLog(r, cls.ids, run.start, run.end, decay, _slope_sup(run.values, run.start)))
        states, u2 = new_states, new_u2
        J += Nr * T
        schedule.append(ScheduleEntry(r, Nr, T, J))
        if exhausted:
            break
    if J < H:
        # fewer than N_r sites left over after the last equal split
        tail = PotentialPiece(J, H, PieceKind.ZERO, anchors={i: st.frac for i, st in states.items()})
        states, u2, recorded = boundary_thread(states, tail, B.points, u2, np.union1d(samples, [J]))
        rec.add(recorded, H)
        pieces.append(tail)

    traces = rec.traces(B.points, states, u2, H)
    meta = p.to_meta()
    meta["finalAnchors"] = [[i, states[i].frac] for i in B.ids]
    potential = Potential(tuple(pieces), H, max((e.scaledSup for e in log), default=0.0), meta)
    fit_from = max(p.classes[0].activation, -p.b, 1)
    per = {}
    for i, tr in traces.items():
        prev, cur = tr.solution()
        l2 = l2_report(tr.n, cumulative=tr.u2cum, log_envelope=tr.logR, fit_from=fit_from)
        per[i] = EigenResult(tr, cur, l2)
    return GluedResult(p, potential, per, schedule, log, exhausted, attempts)


# -- replay --------------------------------------------------------------------

@dataclass(frozen=True)
class AnchorMismatch:
    piece: int
    eigen_id: int
    stored: float
    threaded: float


def plan_from_meta(meta: Mapping) -> GluingPlan:
    """Rebuild the plan recorded in a glued potential's metadata."""
    env = meta.get("envelope")
    pts = canonical_points(meta["energies"], float(meta.get("edge", EDGE_DELTA)))
    classes = tuple(ClassPlan(tuple(c["ids"]), PieceKind(c["kind"]), float(c["K1"]), int(c["activation"]))
                    for c in meta["classes"])
    return GluingPlan(tuple(pts), tuple(BoundaryAngle(float(a)) for a in meta["angles"]), classes,
                      meta["mode"], None if env is None else Envelope.from_dict(env),
                      float(meta["stopFactor"]), int(meta["initialGap"]), int(meta["K2"]),
                      float(meta["targetExponent"]), int(meta["minPieceLength"]),
                      meta.get("maxPieceRatio"), float(meta.get("edge", EDGE_DELTA)),
                      int(meta.get("samplesPerDecade", 2000)))


def replay_traces(V: Potential, *, samples: np.ndarray | None = None,
                  dense_window: tuple[int, int] | None = None):
    """Re-thread every eigenvalue from its boundary condition through ``V``.

    Returns ``(traces, mismatches)``; a mismatch is a piece whose stored
    anchor angle differs from the threaded angle at its start (piece index
    ``len(V.pieces)`` stands for the recorded angles at the horizon).
    """
    p = plan_from_meta(V.meta)
    points = dict(enumerate(p.energies))
    if samples is None:
        samples = sample_grid(V.horizon, p.samplesPerDecade, dense_window)
    states = {i: boundary_to_prufer(p.angles[i], points[i]) for i in points}
    u2 = {i: math.cos(p.angles[i].theta) ** 2 for i in points}
    rec = _Recorder(points)
    bad = []
    for j, piece in enumerate(V.pieces):
        for i, st in states.items():
            a = piece.anchors.get(i)
            if a is not None and a != st.frac:
                bad.append(AnchorMismatch(j, i, a, st.frac))
        smp = np.union1d(samples[(samples >= piece.start) & (samples < piece.end)], [max(piece.start, 1)])
        states, u2, recorded = boundary_thread(states, piece, points, u2, smp)
        rec.add(recorded, piece.end)
    for i, a in V.meta.get("finalAnchors", []):
        if a != states[i].frac:
            bad.append(AnchorMismatch(len(V.pieces), i, a, states[i].frac))
    return rec.traces(points, states, u2, V.horizon), bad
