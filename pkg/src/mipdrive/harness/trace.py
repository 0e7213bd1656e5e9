"""Simulation traces and their CSV form.

``<name>.csv`` holds one row per vehicle per step (header
``t,vehicle,pos,v,z,a_l,a_r``, ``t`` in seconds).  Floats are written with
``repr`` so a re-parse is lossless.  The game metadata of every planning round
goes to the sibling ``<name>.game`` (header ``round,iterations,potential,wall_ms``).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

TRACE_HEADER = ("t", "vehicle", "pos", "v", "z", "a_l", "a_r")
GAME_HEADER = ("round", "iterations", "potential", "wall_ms")


@dataclass(frozen=True)
class TraceRow:
    t: float
    vehicle: int
    pos: float
    v: float
    z: int
    a_l: int = 0
    a_r: int = 0


@dataclass(frozen=True)
class RoundMeta:
    round: int
    iterations: int
    potential: float
    wall_ms: float


@dataclass
class Trace:
    tau: float
    rows: list[TraceRow] = field(default_factory=list)
    rounds: list[RoundMeta] = field(default_factory=list)

    def step_of(self, row: TraceRow) -> int:
        return int(round(row.t / self.tau))

    def by_step(self) -> list[dict[int, TraceRow]]:
        """Rows grouped per step, in step order (missing steps are empty)."""
        if not self.rows:
            return []
        last = max(self.step_of(r) for r in self.rows)
        out: list[dict[int, TraceRow]] = [{} for _ in range(last + 1)]
        for r in self.rows:
            out[self.step_of(r)][r.vehicle] = r
        return out

    @property
    def vehicles(self) -> list[int]:
        return sorted({r.vehicle for r in self.rows})

    def series(self, vehicle: int) -> list[TraceRow]:
        return sorted((r for r in self.rows if r.vehicle == vehicle), key=lambda r: r.t)


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def trace_csv(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in trace.rows:
        w.writerow([_fmt(float(r.t)), r.vehicle, _fmt(float(r.pos)), _fmt(float(r.v)), r.z, r.a_l, r.a_r])
    return buf.getvalue()


def game_csv(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GAME_HEADER)
    for m in trace.rounds:
        w.writerow([m.round, m.iterations, _fmt(float(m.potential)), _fmt(float(m.wall_ms))])
    return buf.getvalue()


def emit_trace(trace: Trace, path, fmt: str = "csv") -> Path:
    """Write the trace and its ``.game`` sibling; returns the trace path."""
    if fmt != "csv":
        raise ValueError(f"unsupported trace format {fmt!r}")
    path = Path(path)
    path.write_text(trace_csv(trace), encoding="utf-8")
    path.with_suffix(".game").write_text(game_csv(trace), encoding="utf-8")
    return path


def parse_trace(path, tau: float | None = None) -> Trace:
    """Read a trace (and its ``.game`` sibling when present).

    ``tau`` defaults to the smallest positive spacing of the timestamps.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TRACE_HEADER)}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(TRACE_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(TRACE_HEADER)} fields, got {len(rec)}")
            t, veh, pos, v, z, al, ar = rec
            rows.append(TraceRow(float(t), int(veh), float(pos), float(v), int(z), int(al), int(ar)))
    if tau is None:
        stamps = sorted({r.t for r in rows})
        gaps = [b - a for a, b in zip(stamps, stamps[1:]) if b > a]
        tau = min(gaps) if gaps else 1.0
    rounds = []
    game_path = path.with_suffix(".game")
    if game_path.exists():
        with open(game_path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            for rec in reader:
                rounds.append(RoundMeta(int(rec[0]), int(rec[1]), float(rec[2]), float(rec[3])))
    return Trace(tau, rows, rounds)
