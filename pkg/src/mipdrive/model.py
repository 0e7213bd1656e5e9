"""Physical quantities of the highway model and per-step feasible sets.

Lanes are numbered 1..L from the rightmost (lowest) lane; the left indicator
permits a move to lane ``z + 1``.  Positions are 1-D longitudinal coordinates
and the signed gap ``d_ij = pos_j - pos_i`` is positive when ``j`` is ahead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence


@dataclass(frozen=True)
class WorldParams:
    L: int
    T: int
    tau: float
    d_bar: float
    d_hat: float
    eps_game: float = 1e-3
    eps_strict: float = 1e-4

    def __post_init__(self):
        problems = []
        if self.L < 1:
            problems.append(f"L must be >= 1 (got {self.L})")
        if self.T < 1:
            problems.append(f"T must be >= 1 (got {self.T})")
        for name in ("tau", "d_bar", "d_hat", "eps_game", "eps_strict"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                problems.append(f"{name} must be positive and finite (got {value})")
        if self.d_hat > self.d_bar:
            problems.append(f"d_hat ({self.d_hat}) must not exceed d_bar ({self.d_bar})")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class VehicleParams:
    """Limits and references of one vehicle.

    ``v_ref`` and ``z_ref`` are profiles indexed by absolute simulation step
    (entry ``k`` is the target at step ``k``); the last entry is held beyond
    the end of the list, so a one-element list is a constant reference.
    """

    id: int
    v_max: float
    delta: float
    r: float
    d0: float
    h: float
    v_ref: tuple[float, ...]
    z_ref: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "v_ref", tuple(float(v) for v in self.v_ref))
        object.__setattr__(self, "z_ref", tuple(int(z) for z in self.z_ref))
        problems = []
        if not self.v_max > 0:
            problems.append(f"v_max must be > 0 (got {self.v_max})")
        if not self.delta > 0:
            problems.append(f"delta must be > 0 (got {self.delta})")
        if not self.r > 0:
            problems.append(f"r must be > 0 (got {self.r})")
        if not self.d0 > 0:
            problems.append(f"d0 must be > 0 (got {self.d0})")
        if not self.h >= 0:
            problems.append(f"h must be >= 0 (got {self.h})")
        if not self.v_ref or not self.z_ref:
            problems.append("v_ref and z_ref need at least one entry")
        for v in self.v_ref:
            if not 0 <= v <= self.v_max:
                problems.append(f"v_ref entry {v} outside [0, {self.v_max}]")
        if problems:
            raise ValueError(f"vehicle {self.id}: " + "; ".join(problems))

    def speed_reference(self, start: int, T: int) -> list[float]:
        """Targets for steps ``start+1 .. start+T``."""
        return [self.v_ref[min(start + k, len(self.v_ref) - 1)] for k in range(1, T + 1)]

    def lane_reference(self, start: int, T: int) -> list[int]:
        return [self.z_ref[min(start + k, len(self.z_ref) - 1)] for k in range(1, T + 1)]


@dataclass(frozen=True)
class VehicleState:
    pos: float
    v: float
    z: int
    a_l: int = 0
    a_r: int = 0

    def problems(self, params: VehicleParams, L: int) -> list[str]:
        out = []
        if not 0 <= self.v <= params.v_max:
            out.append(f"speed {self.v} outside [0, {params.v_max}]")
        if not 1 <= self.z <= L:
            out.append(f"lane {self.z} outside 1..{L}")
        if self.a_l not in (0, 1) or self.a_r not in (0, 1):
            out.append("indicator flags must be 0 or 1")
        elif self.a_l + self.a_r > 1:
            out.append("both indicators on")
        return out


@dataclass(frozen=True)
class PairGeometry:
    d: float
    l: int
    v_rel: float

    @classmethod
    def between(cls, si: VehicleState, sj: VehicleState) -> "PairGeometry":
        return cls(d=sj.pos - si.pos, l=sj.z - si.z, v_rel=sj.v - si.v)

    def swapped(self) -> "PairGeometry":
        return PairGeometry(-self.d, -self.l, -self.v_rel)


@dataclass
class Plan:
    """Physical decisions of one vehicle over a horizon.

    ``v`` and ``z`` hold ``T + 1`` entries, index 0 being the current state;
    ``a_l[t]``/``a_r[t]`` is the indicator shown during step ``t -> t+1``.
    ``q`` is the epigraph value (the vehicle's cost) when known.
    """

    v: list[float]
    z: list[int]
    a_l: list[int]
    a_r: list[int]
    q: float | None = None
    x: object = field(default=None, repr=False, compare=False)

    @property
    def T(self) -> int:
        return len(self.v) - 1

    @classmethod
    def hold(cls, state: VehicleState, T: int) -> "Plan":
        return cls(v=[state.v] * (T + 1), z=[state.z] * (T + 1), a_l=[0] * T, a_r=[0] * T)

    def shifted(self, state: VehicleState) -> "Plan":
        """Drop the executed step and repeat the last decision at the tail."""
        v = [state.v] + self.v[2:] + [self.v[-1]]
        z = [state.z] + self.z[2:] + [self.z[-1]]
        return Plan(v=v, z=z, a_l=self.a_l[1:] + [0], a_r=self.a_r[1:] + [0])

    def tracking_cost(self, params: VehicleParams, start: int) -> float:
        vd = params.speed_reference(start, self.T)
        zd = params.lane_reference(start, self.T)
        return max(
            max(abs(self.v[k] - vd[k - 1]), params.r * abs(self.z[k] - zd[k - 1]))
            for k in range(1, self.T + 1)
        )


def update_distance(d: float, v_i: float, v_j: float, tau: float) -> float:
    """One Euler step of the signed gap ``pos_j - pos_i``."""
    return d + tau * (v_j - v_i)


def safety_distance(v: float, d0: float, h: float) -> float:
    """Standstill gap plus headway: ``d0 + h * v``."""
    return d0 + h * v


def velocity_window(v_now: float, params: VehicleParams) -> tuple[float, float]:
    return max(0.0, v_now - params.delta), min(params.v_max, v_now + params.delta)


def lane_window(z_now: int, a_l: int, a_r: int, L: int) -> list[int]:
    """Lanes reachable next step; indicators permit but never force a change."""
    if a_l + a_r > 1:
        raise ValueError("at most one indicator may be on")
    return list(range(max(1, z_now - a_r), min(L, z_now + a_l) + 1))


def compute_neighborhoods(positions: Sequence[float], d_bar: float) -> list[set[int]]:
    """Index sets ``N_i = {j != i : |pos_j - pos_i| <= d_bar}`` (0-based)."""
    n = len(positions)
    out: list[set[int]] = [set() for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if abs(positions[j] - positions[i]) <= d_bar:
                out[i].add(j)
                out[j].add(i)
    return out


def speed_box(v_now: float, params: VehicleParams, k: int) -> tuple[float, float]:
    """Speeds reachable after ``k`` steps of the velocity window."""
    return max(0.0, v_now - k * params.delta), min(params.v_max, v_now + k * params.delta)


def lane_box(z_now: int, L: int, k: int) -> tuple[int, int]:
    return max(1, z_now - k), min(L, z_now + k)
