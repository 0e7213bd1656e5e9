"""Safety monitors evaluated on realized traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from mipdrive.harness.trace import Trace
from mipdrive.model import VehicleParams, safety_distance

TOL = 1e-6


@dataclass(frozen=True)
class Violation:
    t: float
    i: int
    j: int
    kind: str
    value: float

    def __str__(self) -> str:
        return f"t={self.t:g} ({self.i},{self.j}) {self.kind}: {self.value:g}"


@dataclass
class Verdict:
    violations: list[Violation] = field(default_factory=list)
    min_margin: float = float("inf")

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self) -> Violation | None:
        return self.violations[0] if self.violations else None

    def pair_ok(self, i: int, j: int) -> bool:
        return not any((v.i, v.j) in ((i, j), (j, i)) for v in self.violations)


def check_longitudinal_safety(trace: Trace, params: Mapping[int, VehicleParams], tol: float = TOL) -> Verdict:
    """Same-lane gap and no pass-through between consecutive steps.

    For every ordered pair sharing a lane at step ``t`` the gap must satisfy
    ``|d_ij(t)| >= d0_i + h_i v_i(t)``; if they also share a lane at ``t+1``
    then ``d_ij(t+1) * d_ij(t) >= 0``.  ``min_margin`` is the smallest
    ``|d| - d_s`` seen on a shared lane.
    """
    out = Verdict()
    steps = trace.by_step()
    for n, now in enumerate(steps):
        nxt = steps[n + 1] if n + 1 < len(steps) else {}
        for i, ri in now.items():
            p = params[i]
            for j, rj in now.items():
                if i == j or ri.z != rj.z:
                    continue
                d = rj.pos - ri.pos
                margin = abs(d) - safety_distance(ri.v, p.d0, p.h)
                out.min_margin = min(out.min_margin, margin)
                if margin < -tol:
                    out.violations.append(Violation(ri.t, i, j, "gap below safety distance", margin))
                if i in nxt and j in nxt and nxt[i].z == nxt[j].z:
                    d_next = nxt[j].pos - nxt[i].pos
                    if d_next * d < -tol:
                        out.violations.append(Violation(nxt[i].t, i, j, "passed through on shared lane", d_next * d))
    return out


def check_consecutive_lane_safety(trace: Trace, d_hat: float, strict: bool = False, tol: float = TOL) -> Verdict:
    """Lane changes between vehicles side by side on adjacent lanes.

    For a pair with ``|d(t)| <= d_hat`` and ``|l(t)| = 1`` the default check
    flags a swap, i.e. ``z_i(t+1) = z_j(t)`` together with ``z_j(t+1) = z_i(t)``.
    ``strict`` flags either move on its own.
    """
    out = Verdict()
    steps = trace.by_step()
    for n in range(len(steps) - 1):
        now, nxt = steps[n], steps[n + 1]
        ids = sorted(i for i in now if i in nxt)
        for a, i in enumerate(ids):
            for j in ids[a + 1:]:
                ri, rj = now[i], now[j]
                d = rj.pos - ri.pos
                if abs(d) > d_hat + tol or abs(rj.z - ri.z) != 1:
                    continue
                into_j = nxt[i].z == rj.z
                into_i = nxt[j].z == ri.z
                hit = (into_j or into_i) if strict else (into_j and into_i)
                if hit:
                    out.violations.append(Violation(ri.t, i, j, "lane swap side by side" if into_j and into_i
                                                    else "merge into adjacent vehicle's lane", d))
    return out
