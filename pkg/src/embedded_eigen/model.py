"""Core value types, piecewise potentials and their on-disk format.

Energies are parametrised by quasimomentum, ``E = 2 cos(pi k)`` with
``k in (0, 1)``.  A :class:`Potential` is a gap-free list of
:class:`PotentialPiece` objects; non-zero pieces keep only the generator
parameters and the anchor angles at their first site, and ``V(n)`` is
recomputed by replaying the generating recursion.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import (
    DuplicateEnergyError,
    EdgeEnergyError,
    FileFormatError,
    OutOfHorizonError,
    StepTooLargeError,
)

EDGE_DELTA = 1e-3
DUPLICATE_TOL = 1e-9
FORMAT_NAME = "embedded-eigen/potential"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class EnergyPoint:
    """An energy inside the band together with its quasimomentum.

    Attributes
    ----------
    E : float
        Energy in (-2, 2).
    k : float
        Quasimomentum, ``arccos(E/2)/pi``.
    s : float
        ``sin(pi k)``; every step size is measured in units of it.
    """

    E: float
    k: float
    s: float

    @property
    def c(self) -> float:
        return math.cos(math.pi * self.k)


def make_energy_point(E: float, edge: float = EDGE_DELTA) -> EnergyPoint:
    E = float(E)
    if not abs(E) < 2.0 - edge:
        raise EdgeEnergyError(f"energy {E!r} is within {edge} of the band edge")
    k = math.acos(E / 2.0) / math.pi
    return EnergyPoint(E=E, k=k, s=math.sin(math.pi * k))


@dataclass(frozen=True)
class BoundaryAngle:
    """Boundary condition ``u(1)/u(0) = tan(theta)``."""

    theta: float

    def __post_init__(self):
        if not 0.0 <= self.theta < math.pi:
            raise ValueError(f"boundary angle {self.theta!r} not in [0, pi)")


@dataclass(frozen=True)
class PruferState:
    """Log Prufer radius and unwrapped Prufer angle ``phi = frac + 2 winding``.

    The angle is kept split so that the part entering the recursion never
    loses precision to the number of completed turns.  ``frac`` need not be
    reduced on input; every step returns it in ``[0, 2)``.
    """

    logR: float
    frac: float
    winding: int = 0

    @property
    def phi(self) -> float:
        return self.frac + 2.0 * self.winding

    @property
    def R(self) -> float:
        return math.exp(self.logR)


def resonance_classes(energies: Sequence[EnergyPoint]) -> list[tuple[EnergyPoint, ...]]:
    """Group energies into resonance classes.

    ``E`` and ``-E`` share a class (positive member first); every other energy,
    zero included, is a class of its own.  Classes are returned in order of
    first appearance.
    """
    energies = list(energies)
    for i, a in enumerate(energies):
        for b in energies[i + 1:]:
            if abs(a.E - b.E) <= DUPLICATE_TOL:
                raise DuplicateEnergyError(f"energies {a.E!r} and {b.E!r} coincide")
    used = [False] * len(energies)
    classes = []
    for i, a in enumerate(energies):
        if used[i]:
            continue
        used[i] = True
        partner = None
        if abs(a.E) > DUPLICATE_TOL:
            for j in range(i + 1, len(energies)):
                if not used[j] and abs(energies[j].E + a.E) <= DUPLICATE_TOL:
                    partner = j
                    break
        if partner is None:
            classes.append((a,))
        else:
            used[partner] = True
            b = energies[partner]
            classes.append((a, b) if a.E > 0 else (b, a))
    return classes


class PieceKind(str, enum.Enum):
    ZERO = "zero"
    SINGLE = "single"
    PAIR = "pair"


@dataclass(frozen=True)
class PotentialPiece:
    """One interval ``[start, end)`` of a potential.

    ``targets`` lists the eigenvalue ids whose anchor angles drive ``V``
    (one id for SINGLE, two for PAIR: the ``E`` member then the ``-E``
    member).  ``anchors`` maps every threaded eigenvalue id to the angle
    fraction (``PruferState.frac``) at ``start``.
    """

    start: int
    end: int
    kind: PieceKind
    energy: EnergyPoint | None = None
    K1: float = 0.0
    b: int = 0
    targets: tuple[int, ...] = ()
    anchors: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"empty piece [{self.start}, {self.end})")
        if self.kind is not PieceKind.ZERO:
            if self.energy is None or not self.K1 > 0:
                raise ValueError("non-zero piece needs an energy and K1 > 0")
            if self.start - self.b <= 0:
                raise ValueError("piece start must exceed its base shift b")
            need = 1 if self.kind is PieceKind.SINGLE else 2
            if len(self.targets) != need or any(t not in self.anchors for t in self.targets):
                raise ValueError(f"{self.kind.value} piece needs {need} anchored targets")

    def __len__(self):
        return self.end - self.start

    @cached_property
    def values(self) -> np.ndarray:
        """V on ``[start, end)``, replayed once and memoised."""
        out = np.zeros(self.end - self.start)
        if self.kind is PieceKind.ZERO:
            out.flags.writeable = False
            return out
        kind = 1 if self.kind is PieceKind.SINGLE else 2
        th0 = self.anchors[self.targets[0]]
        th1 = self.anchors[self.targets[1]] if kind == 2 else 0.0
        st, n = _kernels.replay(kind, self.start, self.end, self.b, self.K1,
                                self.energy.k, self.energy.s, th0, th1, out)
        if st != _kernels.OK:
            raise StepTooLargeError(f"replay of piece at {self.start} leaves the Prufer regime at n={n}")
        out.flags.writeable = False
        return out

    def __call__(self, n: int) -> float:
        return float(self.values[n - self.start])


@dataclass(frozen=True)
class Potential:
    """Piecewise potential on ``[0, horizon)``."""

    pieces: tuple[PotentialPiece, ...]
    horizon: int
    c_global: float | None = None
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        pieces = tuple(self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if not pieces or pieces[0].start != 0:
            raise ValueError("first piece must start at 0")
        for a, b in zip(pieces, pieces[1:]):
            if a.end != b.start:
                raise ValueError(f"pieces not contiguous at {a.end}/{b.start}")
        if pieces[-1].end != self.horizon:
            raise ValueError("pieces do not end at the horizon")

    @cached_property
    def _starts(self):
        return np.array([p.start for p in self.pieces])

    def piece_at(self, n: int) -> PotentialPiece:
        if not 0 <= n < self.horizon:
            raise OutOfHorizonError(f"site {n} outside [0, {self.horizon})")
        return self.pieces[int(np.searchsorted(self._starts, n, side="right")) - 1]

    def values(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        stop = self.horizon if stop is None else stop
        if not 0 <= start <= stop <= self.horizon:
            raise OutOfHorizonError(f"range [{start}, {stop}) outside [0, {self.horizon})")
        out = np.empty(stop - start)
        for p in self.pieces:
            lo, hi = max(p.start, start), min(p.end, stop)
            if lo < hi:
                out[lo - start:hi - start] = p.values[lo - p.start:hi - p.start]
        return out

    def scaled_sup(self) -> float:
        """``max_n |V(n)| (1 + n)`` over the horizon."""
        best = 0.0
        for p in self.pieces:
            if p.kind is PieceKind.ZERO:
                continue
            n = np.arange(p.start, p.end)
            best = max(best, float(np.max(np.abs(p.values) * (1.0 + n))))
        return best


def evaluate(V: Potential, n: int) -> float:
    return V.piece_at(n)(n)


@dataclass
class SolutionTrace:
    """Sampled evolution of one eigenvalue's Prufer variables.

    ``u2cum[i]`` is the exact sum of ``u(m)^2`` over all sites ``m < n[i]``
    (``u(0)`` included), accumulated at full resolution even when the
    stored samples are decimated.
    """

    eigen_id: int
    energy: EnergyPoint
    n: np.ndarray
    logR: np.ndarray
    phi: np.ndarray
    u2cum: np.ndarray | None = None

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=np.int64)
        self.logR = np.asarray(self.logR, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if self.u2cum is not None:
            self.u2cum = np.asarray(self.u2cum, dtype=float)
        if self.n.size > 1 and np.any(np.diff(self.n) <= 0):
            raise ValueError("trace sites must be strictly increasing")

    def __len__(self):
        return self.n.size

    def is_dense(self, start: int, stop: int) -> bool:
        """True when every site of ``[start, stop]`` is sampled."""
        i, j = np.searchsorted(self.n, [start, stop])
        return j < self.n.size and self.n[j] == stop and j - i == stop - start

    def window(self, start: int, stop: int) -> "SolutionTrace":
        i, j = np.searchsorted(self.n, [start, stop], side="left")
        j = j + 1 if j < self.n.size and self.n[j] == stop else j
        cum = None if self.u2cum is None else self.u2cum[i:j]
        return SolutionTrace(self.eigen_id, self.energy, self.n[i:j], self.logR[i:j], self.phi[i:j], cum)

    def solution(self) -> tuple[np.ndarray, np.ndarray]:
        """``(u(n-1), u(n))`` at every sample."""
        k, s, c = self.energy.k, self.energy.s, self.energy.c
        a = np.pi * (self.phi - 2.0 * np.floor(0.5 * self.phi)) - np.pi * k
        R = np.exp(self.logR)
        prev = R * np.sin(a)
        return prev, s * R * np.cos(a) + c * prev


# -- file format -------------------------------------------------------------

def format_value(x) -> str:
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise FileFormatError(f"non-finite real {x!r} cannot be written")
        return format(x, ".17g")
    return json.dumps(x)


def dump_document(obj, indent: int = 0) -> str:
    """JSON text with every real written to 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dump_document(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if not len(obj):
            return "[]"
        if all(not isinstance(v, (Mapping, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(format_value(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dump_document(v, indent + 1) for v in obj) + "\n" + end + "]"
    return format_value(obj)


def potential_to_dict(V: Potential) -> dict:
    pieces = []
    for p in V.pieces:
        d = {"start": p.start, "end": p.end, "kind": p.kind.value}
        if p.kind is not PieceKind.ZERO:
            d.update(E=p.energy.E, K1=p.K1, b=p.b, targets=list(p.targets))
        d["anchors"] = [[i, a] for i, a in sorted(p.anchors.items())]
        pieces.append(d)
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "horizon": V.horizon,
        "c_global": V.c_global,
        "meta": dict(V.meta),
        "pieces": pieces,
    }


def potential_from_dict(doc: Mapping) -> Potential:
    if doc.get("format") != FORMAT_NAME:
        raise FileFormatError("not a potential document")
    if doc.get("version") != FORMAT_VERSION:
        raise FileFormatError(f"unsupported format version {doc.get('version')!r}")
    try:
        pieces = []
        for d in doc["pieces"]:
            kind = PieceKind(d["kind"])
            anchors = {int(i): float(a) for i, a in d.get("anchors", [])}
            if kind is PieceKind.ZERO:
                pieces.append(PotentialPiece(int(d["start"]), int(d["end"]), kind, anchors=anchors))
            else:
                pieces.append(PotentialPiece(
                    int(d["start"]), int(d["end"]), kind,
                    energy=make_energy_point(float(d["E"]), edge=0.0),
                    K1=float(d["K1"]), b=int(d["b"]),
                    targets=tuple(int(t) for t in d["targets"]), anchors=anchors))
        c = doc.get("c_global")
        return Potential(tuple(pieces), int(doc["horizon"]), None if c is None else float(c),
                         doc.get("meta", {}))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FileFormatError):
            raise
        raise FileFormatError(f"malformed potential document: {exc}") from exc


def write_potential(path, V: Potential) -> None:
    Path(path).write_text(dump_document(potential_to_dict(V)) + "\n")


def read_potential(path) -> Potential:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    return potential_from_dict(doc)


def zero_potential(horizon: int, meta: Mapping | None = None) -> Potential:
    return Potential((PotentialPiece(0, horizon, PieceKind.ZERO),), horizon, 0.0, meta or {})


def energy_points(values: Iterable[float], edge: float = EDGE_DELTA) -> list[EnergyPoint]:
    return [make_energy_point(E, edge) for E in values]
