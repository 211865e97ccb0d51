"""Command-line front end: ``construct``, ``verify``, ``spectrum``, ``export``.

Exit codes: 0 success, 1 error (a JSON error record goes to stderr),
3 a verification check failed its tolerance.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import gluer, verify
from .errors import (
    EmbeddedError,
    FileFormatError,
    InsufficientSpanError,
    OutOfHorizonError,
    ParameterError,
)
from .model import (
    BoundaryAngle,
    Potential,
    SolutionTrace,
    format_value,
    dump_document,
    read_potential,
    write_potential,
)

CONFIG_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_TOLERANCE = 0, 1, 3


@dataclass
class Tolerances:
    maxUExponent: float = -1.0
    maxLastDecadeFraction: float = 0.01
    maxDecaySlope: float | None = None
    maxOscillatoryC: float | None = None
    minOverlap: float = 0.99


@dataclass
class RunConfig:
    """Everything a run needs; serialised as a versioned JSON document.

    ``envelope`` is ``None`` or ``{"name": "log"}``,
    ``{"name": "power", "alpha": a}`` or ``{"name": "table", "table": [[n, h], ...]}``.
    """

    energies: list[float]
    angles: list[float]
    mode: str = gluer.FINITE
    envelope: dict | None = None
    targetExponent: float = 5.0
    stopFactor: float = 8.0
    horizon: int = 1_000_000
    initialGap: int | None = None
    minPieceLength: int = 1
    maxPieceRatio: float | None = None
    k1: list[float] | None = None
    k1Ladder: float = 2.0
    samplesPerDecade: int = 2000
    fullTraceWindow: list[int] | None = None
    truncation: int = 20_000
    tolerances: Tolerances = field(default_factory=Tolerances)
    outputs: dict = field(default_factory=lambda: {
        "potential": "potential.json", "traces": "traces", "schedule": "schedule.csv",
        "log": "run.log", "report": "verify.json", "spectrum": "spectrum.json"})

    def __post_init__(self):
        if len(self.energies) != len(self.angles):
            raise ParameterError("energies and angles differ in length")
        if isinstance(self.tolerances, dict):
            self.tolerances = Tolerances(**self.tolerances)

    def to_dict(self) -> dict:
        d = {"version": CONFIG_VERSION}
        d.update(asdict(self))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if d.get("version") != CONFIG_VERSION:
            raise FileFormatError(f"unsupported config version {d.get('version')!r}")
        known = {f.name for f in fields(cls)}
        extra = set(d) - known - {"version"}
        if extra:
            raise FileFormatError(f"unknown config keys {sorted(extra)}")
        return cls(**{k: v for k, v in d.items() if k != "version"})

    def plan(self) -> gluer.GluingPlan:
        env = None if self.envelope is None else gluer.Envelope.from_dict(self.envelope)
        return gluer.plan(
            self.energies, [BoundaryAngle(float(a)) for a in self.angles], self.mode,
            envelope=env, target_exponent=self.targetExponent, stop_factor=self.stopFactor,
            initial_gap=self.initialGap, min_piece_length=self.minPieceLength,
            max_piece_ratio=self.maxPieceRatio, k1=self.k1, k1_ladder=self.k1Ladder,
            samples_per_decade=self.samplesPerDecade)

    @property
    def window(self) -> tuple[int, int] | None:
        return None if self.fullTraceWindow is None else tuple(self.fullTraceWindow)


def load_config(path) -> RunConfig:
    try:
        return RunConfig.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    except TypeError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


def save_config(path, cfg: RunConfig) -> None:
    Path(path).write_text(dump_document(cfg.to_dict()) + "\n")


# -- tables ------------------------------------------------------------------

def write_table(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(x) for x in row])


def write_trace(path, tr: SolutionTrace) -> None:
    _, u = tr.solution()
    cols = [tr.n, tr.logR, tr.phi, u]
    cols.append(tr.u2cum if tr.u2cum is not None else np.full(tr.n.size, math.nan))
    write_table(path, ["n", "logR", "phi", "u", "u2cum"], zip(*cols))


def read_trace(path, eigen_id, energy) -> SolutionTrace:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return SolutionTrace(eigen_id, energy, data[:, 0].astype(np.int64), data[:, 1], data[:, 2], data[:, 4])


def write_document(path, obj) -> None:
    Path(path).write_text(dump_document(obj) + "\n")


# -- commands ------------------------------------------------------------------

def cmd_construct(cfg: RunConfig, out: Path) -> gluer.GluedResult:
    out.mkdir(parents=True, exist_ok=True)
    res = gluer.build(cfg.plan(), cfg.horizon, dense_window=cfg.window)
    o = cfg.outputs
    write_potential(out / o["potential"], res.potential)
    tdir = out / o["traces"]
    tdir.mkdir(exist_ok=True)
    for i, er in res.perEigenvalue.items():
        write_trace(tdir / f"trace_{i}.csv", er.trace)
    write_table(out / o["schedule"], ["r", "N_r", "T_r", "J_r"],
                [(e.r, e.N, e.T, e.J) for e in res.scheduleLog])
    lines = res.run_log()
    lines.append(f"horizon_exhausted={str(res.horizonExhausted).lower()} "
                 f"sup|V|(1+n)={format_value(res.potential.c_global)}")
    for i, er in res.perEigenvalue.items():
        lines.append(f"eigen={i} E={format_value(er.trace.energy.E)} l2_total={format_value(er.l2.total)} "
                     f"last_decade={format_value(er.l2.lastDecadeFraction)} exponent={format_value(er.l2.absExponent)}")
    (out / o["log"]).write_text("\n".join(lines) + "\n")
    save_config(out / "config.json", cfg)
    return res


@dataclass
class Check:
    name: str
    value: float | None
    limit: float | None
    passed: bool

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name} value={self.value!r} limit={self.limit!r}"


def run_checks(V: Potential, tol: Tolerances, window: tuple[int, int] | None = None) -> tuple[list[Check], dict]:
    """Replay consistency, decay, ℓ² and (with a dense window) oscillatory sums."""
    traces, bad = gluer.replay_traces(V, dense_window=window)
    p = gluer.plan_from_meta(V.meta)
    checks = [Check("replay_anchors", float(len(bad)), 0.0, not bad)]
    fit_from = max(p.classes[0].activation, -p.b, 1)
    report = {"eigenvalues": []}
    for i, tr in traces.items():
        l2 = verify.l2_report(tr.n, cumulative=tr.u2cum, log_envelope=tr.logR, fit_from=fit_from)
        entry = {"id": i, "E": tr.energy.E, "l2_total": l2.total,
                 "lastDecadeFraction": l2.lastDecadeFraction, "uExponent": l2.absExponent}
        checks.append(Check(f"u_exponent[{i}]", l2.absExponent, tol.maxUExponent,
                            l2.absExponent <= tol.maxUExponent))
        checks.append(Check(f"last_decade[{i}]", l2.lastDecadeFraction, tol.maxLastDecadeFraction,
                            l2.lastDecadeFraction <= tol.maxLastDecadeFraction))
        try:
            dr = verify.decay_exponent(tr, p.b, start=fit_from)
            entry["decaySlope"] = dr.slope
            if tol.maxDecaySlope is not None:
                checks.append(Check(f"decay_slope[{i}]", dr.slope, tol.maxDecaySlope,
                                    dr.slope <= tol.maxDecaySlope))
        except InsufficientSpanError as exc:
            entry["decaySlope"] = None
            if tol.maxDecaySlope is not None:
                checks.append(Check(f"decay_slope[{i}] ({exc})", None, tol.maxDecaySlope, False))
        if window is not None:
            _, C = verify.oscillatory_sum(tr, p.b, window[0], n_end=window[1])
            entry["oscillatoryC"] = C
            if tol.maxOscillatoryC is not None:
                checks.append(Check(f"oscillatory_C[{i}]", C, tol.maxOscillatoryC,
                                    C <= tol.maxOscillatoryC))
        report["eigenvalues"].append(entry)
    report["checks"] = [asdict(c) for c in checks]
    report["passed"] = all(c.passed for c in checks)
    return checks, report


def cmd_verify(potential_path, cfg: RunConfig | None, out: Path | None,
               window: tuple[int, int] | None = None) -> tuple[bool, list[Check]]:
    V = read_potential(potential_path)
    tol = cfg.tolerances if cfg is not None else Tolerances()
    if window is None and cfg is not None:
        window = cfg.window
    checks, report = run_checks(V, tol, window)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        name = cfg.outputs["report"] if cfg is not None else "verify.json"
        write_document(out / name, report)
    return report["passed"], checks


def cmd_spectrum(potential_path, M: int, targets: Sequence[float] | None = None,
                 theta: float | None = None, out: Path | None = None,
                 all_eigenvalues: bool = False) -> dict:
    V = read_potential(potential_path)
    if M > V.horizon:
        raise OutOfHorizonError(f"truncation {M} exceeds horizon {V.horizon}")
    meta = V.meta
    if targets is None and "energies" in meta:
        p = gluer.plan_from_meta(meta)
        pts, angs = list(p.energies), list(p.angles)
    else:
        pts = gluer.canonical_points(targets or [])
        th = BoundaryAngle(math.pi / 2 if theta is None else theta)
        angs = [th] * len(pts)
    if theta is not None:
        angs = [BoundaryAngle(theta)] * len(pts)
    doc = {"truncationSize": M, "targets": []}
    if pts:
        rep = verify.truncated_spectrum(V, angs, M, pts)
        doc["targets"] = [asdict(t) for t in rep.targets]
    if all_eigenvalues:
        diag, first = verify.boundary_diagonal(V, angs[0] if angs else BoundaryAngle(math.pi / 2), M)
        doc["firstSite"] = first
        doc["eigenvalues"] = [float(x) for x in verify.sturm_eigenvalues(diag)]
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_document(out / "spectrum.json", doc)
        if all_eigenvalues:
            write_table(out / "eigenvalues.csv", ["j", "eigenvalue"], enumerate(doc["eigenvalues"]))
    return doc


def cmd_export(potential_path, out: Path, window: tuple[int, int] | None = None,
               per_decade: int = 2000) -> Path:
    """Potential values at log-spaced sites, plus every site of ``window``."""
    V = read_potential(potential_path)
    n = gluer.sample_grid(V.horizon - 1, per_decade, window)
    n = np.union1d([0], n[n < V.horizon])
    vals = V.values()
    out.mkdir(parents=True, exist_ok=True)
    path = out / "potential.csv"
    write_table(path, ["n", "V", "V_times_1_plus_n"], zip(n, vals[n], vals[n] * (1.0 + n)))
    return path


# -- argument parsing ----------------------------------------------------------

def parse_window(text: str | None) -> tuple[int, int] | None:
    if text is None:
        return None
    lo, sep, hi = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError("window must look like START..END")
    lo, hi = int(lo), int(hi)
    if hi < lo:
        raise argparse.ArgumentTypeError("window end before start")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="embedded-eigen", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="build a potential from a config file")
    c.add_argument("--config", required=True)
    c.add_argument("--out", default=".")
    c.add_argument("--horizon", type=int)
    c.add_argument("--target-exponent", type=float)
    c.add_argument("--stop-factor", type=float)
    c.add_argument("--full-trace-window", type=parse_window)

    v = sub.add_parser("verify", help="replay and check a potential file")
    v.add_argument("potential")
    v.add_argument("--config")
    v.add_argument("--out")
    v.add_argument("--full-trace-window", type=parse_window)

    s = sub.add_parser("spectrum", help="truncated-operator eigenvalues near the targets")
    s.add_argument("potential")
    s.add_argument("--truncation", type=int, required=True)
    s.add_argument("--targets", type=float, nargs="*")
    s.add_argument("--theta", type=float)
    s.add_argument("--all-eigenvalues", action="store_true")
    s.add_argument("--config")
    s.add_argument("--out")

    e = sub.add_parser("export", help="tabulate V(n) on a log grid")
    e.add_argument("potential")
    e.add_argument("--out", default=".")
    e.add_argument("--full-trace-window", type=parse_window)
    return ap


def _error(command: str, exc: Exception) -> int:
    code = getattr(exc, "code", type(exc).__name__)
    rec = {"error": code, "type": type(exc).__name__, "message": str(exc), "command": command}
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)
    return EXIT_ERROR


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "construct":
            cfg = load_config(args.config)
            if args.horizon is not None:
                cfg.horizon = args.horizon
            if args.target_exponent is not None:
                cfg.targetExponent = args.target_exponent
            if args.stop_factor is not None:
                cfg.stopFactor = args.stop_factor
            if args.full_trace_window is not None:
                cfg.fullTraceWindow = list(args.full_trace_window)
            res = cmd_construct(cfg, Path(args.out))
            print(f"wrote {len(res.potential.pieces)} pieces to {Path(args.out) / cfg.outputs['potential']}")
            return EXIT_OK
        if args.command == "verify":
            cfg = load_config(args.config) if args.config else None
            ok, checks = cmd_verify(args.potential, cfg, Path(args.out) if args.out else None,
                                    args.full_trace_window)
            for ch in checks:
                print(ch.line())
            return EXIT_OK if ok else EXIT_TOLERANCE
        if args.command == "spectrum":
            doc = cmd_spectrum(args.potential, args.truncation, args.targets, args.theta,
                               Path(args.out) if args.out else None, args.all_eigenvalues)
            minov = load_config(args.config).tolerances.minOverlap if args.config else None
            ok = True
            for t in doc["targets"]:
                print(f"E={t['E']!r} nearest={t['nearestEigenvalue']!r} "
                      f"overlap={t['eigenvectorOverlap']:.6f} residual={t['residualNorm']:.3e}")
                if minov is not None and t["eigenvectorOverlap"] < minov:
                    ok = False
            return EXIT_OK if ok else EXIT_TOLERANCE
        if args.command == "export":
            path = cmd_export(args.potential, Path(args.out), args.full_trace_window)
            print(f"wrote {path}")
            return EXIT_OK
    except (EmbeddedError, OSError) as exc:
        return _error(args.command, exc)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
