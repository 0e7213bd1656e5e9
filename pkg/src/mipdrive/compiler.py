"""Big-M compilation of the driving rules into one MILP per vehicle.

Logical conditions over linear predicates are turned into mixed-integer rows
with five reusable inequality systems (``s_geq``, ``s_leq``, ``s_and``,
``s_or``, ``s_product``).  The big-M constants come from interval arithmetic
over the declared variable boxes, so every variable that appears inside a
pattern must have finite bounds.

Per vehicle ``i`` the model holds ``1 + T*(21*|N_i| + 4)`` variables and
``T*(67*|N_i| + 9)`` rows.  Step indexing: ``v(k), z(k)`` are decisions for
``k = 1..T``; indicators ``a(t)`` for ``t = 0..T-1`` gate the move
``z(t) -> z(t+1)``.  The gap dynamics is ``d(k+1) = d(k) + tau*(v_j(k) - v_i(k))``
with ``v(0)`` the current speed.  Safety and free-space blocks at step ``k``
use ``d(k), l(k)``; the lateral block at step ``k`` guards the move into
``z(k)`` and therefore reads ``d(k-1), l(k-1), a(k-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from mipdrive.model import Plan, VehicleParams, VehicleState, WorldParams, lane_box, speed_box

CONTINUOUS = "continuous"
BINARY = "binary"
INTEGER = "integer"

OWN_TAGS = ("q", "v", "z", "a_l", "a_r")
# order in which a (j, k) block declares its auxiliaries
AUX_TAGS = (
    "eta", "theta", "alpha", "beta", "kappa", "lambda", "gamma", "delta",
    "mu", "nu", "zeta", "xi", "f", "g", "h", "k", "m", "phi", "psi", "p", "s",
)
AUX_ROWS_PER_BLOCK = 67
OWN_ROWS_PER_STEP = 9


class CompileError(ValueError):
    pass


class LinearExpr:
    """Affine expression ``sum(coef * x[idx]) + const``."""

    __slots__ = ("coefs", "const")

    def __init__(self, coefs: Mapping[int, float] | None = None, const: float = 0.0):
        self.coefs = {k: float(v) for k, v in (coefs or {}).items() if v != 0}
        self.const = float(const)

    @classmethod
    def var(cls, index: int, coef: float = 1.0) -> "LinearExpr":
        return cls({index: coef})

    @classmethod
    def constant(cls, value: float) -> "LinearExpr":
        return cls(None, value)

    @property
    def is_constant(self) -> bool:
        return not self.coefs

    def _coerce(self, other) -> "LinearExpr":
        if isinstance(other, LinearExpr):
            return other
        return LinearExpr(None, other)

    def __add__(self, other) -> "LinearExpr":
        other = self._coerce(other)
        coefs = dict(self.coefs)
        for k, v in other.coefs.items():
            coefs[k] = coefs.get(k, 0.0) + v
        return LinearExpr(coefs, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "LinearExpr":
        return LinearExpr({k: -v for k, v in self.coefs.items()}, -self.const)

    def __sub__(self, other) -> "LinearExpr":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "LinearExpr":
        return self._coerce(other) - self

    def __mul__(self, scalar: float) -> "LinearExpr":
        if isinstance(scalar, LinearExpr):
            if scalar.is_constant:
                scalar = scalar.const
            elif self.is_constant:
                return scalar * self.const
            else:
                raise TypeError("product of two non-constant expressions is not linear")
        return LinearExpr({k: v * scalar for k, v in self.coefs.items()}, self.const * scalar)

    __rmul__ = __mul__

    def value(self, x: Sequence[float]) -> float:
        return self.const + sum(c * x[k] for k, c in self.coefs.items())

    def __repr__(self) -> str:
        terms = " ".join(f"{c:+g}*x{k}" for k, c in sorted(self.coefs.items()))
        return f"LinearExpr({terms} {self.const:+g})"


@dataclass
class VarInfo:
    index: int
    kind: str
    lo: float
    hi: float
    tag: str
    j: int | None = None
    t: int | None = None
    priority: int = 0

    @property
    def name(self) -> str:
        parts = [self.tag]
        if self.j is not None:
            parts.append(f"j{self.j}")
        if self.t is not None:
            parts.append(f"t{self.t}")
        return "_".join(parts)


@dataclass(frozen=True)
class Constraint:
    """Row ``sum(coefs[k] * x[k]) <= rhs``."""

    coefs: Mapping[int, float]
    rhs: float
    name: str = ""

    @classmethod
    def leq_zero(cls, expr: LinearExpr, name: str = "") -> "Constraint":
        return cls(dict(expr.coefs), -expr.const, name)

    def activity(self, x: Sequence[float]) -> float:
        return sum(c * x[k] for k, c in self.coefs.items())

    def violation(self, x: Sequence[float]) -> float:
        return max(0.0, self.activity(x) - self.rhs)


@dataclass
class MilpInstance:
    """Minimise ``objective`` subject to ``constraints`` and variable boxes."""

    objective: LinearExpr
    constraints: list[Constraint]
    vars: list[VarInfo]

    def __post_init__(self):
        n = len(self.vars)
        for row in self.constraints:
            for k in row.coefs:
                if not 0 <= k < n:
                    raise CompileError(f"row {row.name!r} references undeclared variable {k}")
        for k in self.objective.coefs:
            if not 0 <= k < n:
                raise CompileError(f"objective references undeclared variable {k}")

    @property
    def n_vars(self) -> int:
        return len(self.vars)

    @property
    def n_rows(self) -> int:
        return len(self.constraints)

    @cached_property
    def arrays(self) -> "InstanceArrays":
        n, m = self.n_vars, self.n_rows
        c = np.zeros(n)
        for k, v in self.objective.coefs.items():
            c[k] = v
        A = np.zeros((m, n))
        b = np.empty(m)
        for r, row in enumerate(self.constraints):
            for k, v in row.coefs.items():
                A[r, k] += v
            b[r] = row.rhs
        lo = np.array([v.lo for v in self.vars], dtype=float)
        hi = np.array([v.hi for v in self.vars], dtype=float)
        integer = np.array([v.kind != CONTINUOUS for v in self.vars], dtype=bool)
        priority = np.array([v.priority for v in self.vars], dtype=int)
        return InstanceArrays(c, self.objective.const, A, b, lo, hi, integer, priority)

    def max_violation(self, x: Sequence[float]) -> float:
        worst = 0.0
        for row in self.constraints:
            worst = max(worst, row.violation(x))
        for var in self.vars:
            worst = max(worst, var.lo - x[var.index], x[var.index] - var.hi)
        return worst

    def with_bounds(self, lo: Sequence[float], hi: Sequence[float]) -> "MilpInstance":
        new_vars = [
            VarInfo(v.index, v.kind, float(l), float(h), v.tag, v.j, v.t, v.priority)
            for v, l, h in zip(self.vars, lo, hi)
        ]
        return MilpInstance(self.objective, self.constraints, new_vars)

    def relaxed(self) -> "MilpInstance":
        new_vars = [
            VarInfo(v.index, CONTINUOUS, v.lo, v.hi, v.tag, v.j, v.t, v.priority) for v in self.vars
        ]
        return MilpInstance(self.objective, self.constraints, new_vars)


@dataclass(frozen=True)
class InstanceArrays:
    c: np.ndarray
    c0: float
    A: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    integer: np.ndarray
    priority: np.ndarray


def expr_range(f: LinearExpr, vars: Sequence[VarInfo]) -> tuple[float, float]:
    """Exact min and max of an affine expression over the variable box."""
    lo = hi = f.const
    for k, c in f.coefs.items():
        v = vars[k]
        if not (math.isfinite(v.lo) and math.isfinite(v.hi)):
            raise CompileError(f"variable {v.name} (index {k}) has an unbounded box {v.lo, v.hi}")
        if c > 0:
            lo += c * v.lo
            hi += c * v.hi
        else:
            lo += c * v.hi
            hi += c * v.lo
    return lo, hi


def _require_binary(x: LinearExpr, vars: Sequence[VarInfo], role: str) -> None:
    if x.is_constant:
        if x.const not in (0.0, 1.0):
            raise CompileError(f"{role} is the constant {x.const}, not a binary value")
        return
    if len(x.coefs) != 1 or x.const != 0.0:
        raise CompileError(f"{role} must be a single binary variable, got {x!r}")
    (k, c), = x.coefs.items()
    if c != 1.0 or vars[k].kind != BINARY:
        raise CompileError(f"{role} ({vars[k].name}) is not a binary variable")


def s_geq(delta: LinearExpr, f: LinearExpr, c: float, vars: Sequence[VarInfo], eps: float) -> list[Constraint]:
    """``[delta = 1] <=> [f >= c]``; values in ``(c - eps, c)`` are excluded."""
    _require_binary(delta, vars, "delta")
    m, M = expr_range(f, vars)
    return [
        Constraint.leq_zero((c - m) * delta - f + m, "S>=.1"),
        Constraint.leq_zero(f - c + eps - (M - c + eps) * delta, "S>=.2"),
    ]


def s_leq(delta: LinearExpr, f: LinearExpr, c: float, vars: Sequence[VarInfo], eps: float) -> list[Constraint]:
    """``[delta = 1] <=> [f <= c]``; values in ``(c, c + eps)`` are excluded."""
    _require_binary(delta, vars, "delta")
    m, M = expr_range(f, vars)
    return [
        Constraint.leq_zero((M - c) * delta + f - M, "S<=.1"),
        Constraint.leq_zero(eps + c - f - (c + eps - m) * delta, "S<=.2"),
    ]


def s_and(delta: LinearExpr, sigma: LinearExpr, gamma: LinearExpr, vars: Sequence[VarInfo]) -> list[Constraint]:
    for x, role in ((delta, "delta"), (sigma, "sigma"), (gamma, "gamma")):
        _require_binary(x, vars, role)
    return [
        Constraint.leq_zero(delta - sigma, "S&.1"),
        Constraint.leq_zero(delta - gamma, "S&.2"),
        Constraint.leq_zero(sigma + gamma - delta - 1, "S&.3"),
    ]


def s_or(delta: LinearExpr, sigma: LinearExpr, gamma: LinearExpr, vars: Sequence[VarInfo]) -> list[Constraint]:
    for x, role in ((delta, "delta"), (sigma, "sigma"), (gamma, "gamma")):
        _require_binary(x, vars, role)
    return [
        Constraint.leq_zero(sigma - delta, "S|.1"),
        Constraint.leq_zero(gamma - delta, "S|.2"),
        Constraint.leq_zero(delta - sigma - gamma, "S|.3"),
    ]


def s_product(g: LinearExpr, f: LinearExpr, delta: LinearExpr, vars: Sequence[VarInfo]) -> list[Constraint]:
    """``g = delta * f``: ``g = 0`` when ``delta = 0`` and ``g = f`` otherwise."""
    _require_binary(delta, vars, "delta")
    if g.is_constant or len(g.coefs) != 1:
        raise CompileError(f"product target must be a single variable, got {g!r}")
    m, M = expr_range(f, vars)
    return [
        Constraint.leq_zero(m * delta - g, "S=>.1"),
        Constraint.leq_zero(g - M * delta, "S=>.2"),
        Constraint.leq_zero(f - g - M * (1 - delta), "S=>.3"),
        Constraint.leq_zero(g - f + m * (1 - delta), "S=>.4"),
    ]


class ModelBuilder:
    def __init__(self):
        self.vars: list[VarInfo] = []
        self.rows: list[Constraint] = []
        self.symbols: dict[tuple, int] = {}

    def add_var(self, tag: str, kind: str, lo: float, hi: float, j=None, t=None, priority: int = 0) -> LinearExpr:
        if kind == BINARY:
            lo, hi = 0.0, 1.0
        index = len(self.vars)
        self.vars.append(VarInfo(index, kind, float(lo), float(hi), tag, j, t, priority))
        key = (tag, j, t)
        if key in self.symbols:
            raise CompileError(f"symbol {key} declared twice")
        self.symbols[key] = index
        return LinearExpr.var(index)

    def add(self, rows: Iterable[Constraint], prefix: str = "") -> int:
        count = 0
        for row in rows:
            self.rows.append(Constraint(row.coefs, row.rhs, f"{prefix}{row.name}"))
            count += 1
        return count

    def range(self, f: LinearExpr) -> tuple[float, float]:
        return expr_range(f, self.vars)


@dataclass(frozen=True)
class RuleSet:
    """Which of the coupling rules are emitted; the safety gap is always on."""

    free_space: bool = True
    lateral: bool = True

    @property
    def complete(self) -> bool:
        return self.free_space and self.lateral


@dataclass
class CompiledPlanProblem:
    instance: MilpInstance
    symbols: dict[tuple, int]
    vehicle: int
    neighbors: tuple[int, ...]
    T: int
    start: int
    n_own: int
    n_aux: int
    c_total: int
    n_guard: int = 0
    c_guard: int = 0
    row_blocks: dict[str, int] = field(default_factory=dict)

    def index(self, tag: str, j=None, t=None) -> int:
        return self.symbols[(tag, j, t)]

    @property
    def n_total(self) -> int:
        return self.n_own + self.n_aux

    def plan_from(self, x: Sequence[float], state: VehicleState) -> Plan:
        """Read the physical decisions out of a solution vector."""
        T = self.T
        v = [state.v] + [float(x[self.index("v", None, k)]) for k in range(1, T + 1)]
        z = [state.z] + [int(round(x[self.index("z", None, k)])) for k in range(1, T + 1)]
        a_l = [int(round(x[self.index("a_l", None, t)])) for t in range(T)]
        a_r = [int(round(x[self.index("a_r", None, t)])) for t in range(T)]
        return Plan(v=v, z=z, a_l=a_l, a_r=a_r, q=float(x[self.index("q")]), x=np.asarray(x, dtype=float))

    def physical_bounds(self, plan: Plan) -> tuple[np.ndarray, np.ndarray]:
        """Variable boxes with the physical decisions pinned to ``plan``."""
        lo = self.instance.arrays.lo.copy()
        hi = self.instance.arrays.hi.copy()
        for k in range(1, self.T + 1):
            for tag, value in (("v", plan.v[k]), ("z", plan.z[k])):
                idx = self.index(tag, None, k)
                lo[idx] = hi[idx] = value
        for t in range(self.T):
            for tag, value in (("a_l", plan.a_l[t]), ("a_r", plan.a_r[t])):
                idx = self.index(tag, None, t)
                lo[idx] = hi[idx] = value
        return lo, hi


def expected_counts(T: int, n_neighbors: int) -> tuple[int, int]:
    """``(n_i, c_i)`` for a fully-ruled model."""
    return 1 + T * (21 * n_neighbors + 4), T * (67 * n_neighbors + 9)


def _check_plan(j: int, plan: Plan | None, T: int) -> Plan:
    if plan is None:
        raise CompileError(f"missing plan for neighbour {j}")
    if len(plan.v) != T + 1 or len(plan.z) != T + 1 or len(plan.a_l) != T or len(plan.a_r) != T:
        raise CompileError(f"plan of neighbour {j} does not cover the horizon T={T}")
    return plan


def compile_vehicle_milp(
    i: int,
    params: Mapping[int, VehicleParams],
    states: Mapping[int, VehicleState],
    neighbor_plans: Mapping[int, Plan],
    world: WorldParams,
    *,
    neighbors: Iterable[int] | None = None,
    start: int = 0,
    rules: RuleSet = RuleSet(),
    guards: bool = False,
) -> CompiledPlanProblem:
    """Build vehicle ``i``'s horizon MILP with its neighbours' plans as constants.

    ``neighbors`` defaults to every vehicle within ``world.d_bar`` of ``i``.
    ``start`` is the absolute step of the current state (selects references).
    With ``guards`` the model also carries, per neighbour, the rows of the
    neighbour's own problem that depend on ``i`` (see ``_add_guards``), so a
    solution never invalidates a plan already committed by a neighbour.
    """
    T, tau, L, eps = world.T, world.tau, world.L, world.eps_strict
    p_i = params[i]
    s_i = states[i]
    problems = s_i.problems(p_i, L)
    if problems:
        raise CompileError(f"vehicle {i} has an infeasible initial state: " + "; ".join(problems))
    if neighbors is None:
        neighbors = [j for j in states if j != i and abs(states[j].pos - s_i.pos) <= world.d_bar]
    nbrs = tuple(sorted(neighbors))
    plans = {j: _check_plan(j, neighbor_plans.get(j), T) for j in nbrs}

    mb = ModelBuilder()
    vd = p_i.speed_reference(start, T)
    zd = p_i.lane_reference(start, T)
    for z_target in zd:
        if not 1 <= z_target <= L:
            raise CompileError(f"vehicle {i}: lane reference {z_target} outside 1..{L}")

    # own variables
    q_hi = 0.0
    for k in range(1, T + 1):
        vlo, vhi = speed_box(s_i.v, p_i, k)
        zlo, zhi = lane_box(s_i.z, L, k)
        q_hi = max(q_hi, abs(vlo - vd[k - 1]), abs(vhi - vd[k - 1]),
                   p_i.r * abs(zlo - zd[k - 1]), p_i.r * abs(zhi - zd[k - 1]))
    q = mb.add_var("q", CONTINUOUS, 0.0, q_hi)
    v = {0: LinearExpr.constant(s_i.v)}
    z = {0: LinearExpr.constant(s_i.z)}
    a_l, a_r = {}, {}
    for k in range(1, T + 1):
        v[k] = mb.add_var("v", CONTINUOUS, *speed_box(s_i.v, p_i, k), t=k)
        z[k] = mb.add_var("z", INTEGER, *lane_box(s_i.z, L, k), t=k, priority=3)
        a_l[k - 1] = mb.add_var("a_l", BINARY, 0, 1, t=k - 1, priority=3)
        a_r[k - 1] = mb.add_var("a_r", BINARY, 0, 1, t=k - 1, priority=3)
    n_own = len(mb.vars)

    blocks: dict[str, int] = {}

    def emit(block: str, rows):
        blocks[block] = blocks.get(block, 0) + mb.add(rows, prefix=f"{block}:")

    for t in range(T):
        k = t + 1
        emit("epigraph", [
            Constraint.leq_zero(v[k] - vd[t] - q),
            Constraint.leq_zero(vd[t] - v[k] - q),
            Constraint.leq_zero(p_i.r * (z[k] - zd[t]) - q),
            Constraint.leq_zero(p_i.r * (zd[t] - z[k]) - q),
        ])
        emit("accel", [
            Constraint.leq_zero(v[k] - v[t] - p_i.delta),
            Constraint.leq_zero(v[t] - v[k] - p_i.delta),
        ])
        emit("lane_gate", [
            Constraint.leq_zero(z[k] - z[t] - a_l[t]),
            Constraint.leq_zero(z[t] - z[k] - a_r[t]),
        ])
        emit("xor", [Constraint.leq_zero(a_l[t] + a_r[t] - 1)])

    aux = {}
    for j in nbrs:
        pj = plans[j]
        d = {0: LinearExpr.constant(states[j].pos - s_i.pos)}
        for k in range(1, T + 1):
            d[k] = d[k - 1] + tau * (pj.v[k - 1] - v[k - 1])
        for k in range(1, T + 1):
            l_now = pj.z[k] - z[k]
            l_prev = pj.z[k - 1] - z[k - 1]
            ds = p_i.d0 + p_i.h * v[k]
            x = {}
            for tag in AUX_TAGS:
                if tag in ("f", "g", "h", "k", "m", "p", "s"):
                    continue
                prio = 2 if tag in ("beta", "mu", "nu") else 1
                x[tag] = mb.add_var(tag, BINARY, 0, 1, j=j, t=k, priority=prio)
            for tag, expr, gate in (
                ("f", d[k], "xi"), ("g", ds, "alpha"), ("h", d[k], "alpha"),
                ("k", v[k], "xi"), ("m", v[k], "alpha"),
                ("p", z[k - 1], "psi"), ("s", z[k], "psi"),
            ):
                lo, hi = mb.range(expr)
                x[tag] = mb.add_var(tag, CONTINUOUS, min(lo, 0.0), max(hi, 0.0), j=j, t=k)
            aux[(j, k)] = x
            V = mb.vars
            emit("alpha", s_leq(x["eta"], l_now, 0, V, eps) + s_geq(x["theta"], l_now, 0, V, eps)
                 + s_and(x["alpha"], x["eta"], x["theta"], V))
            emit("beta", s_geq(x["beta"], d[k], 0, V, eps))
            emit("gamma", s_leq(x["kappa"], l_prev, 1, V, eps) + s_geq(x["lambda"], l_prev, 1, V, eps)
                 + s_and(x["gamma"], x["kappa"], x["lambda"], V))
            emit("delta", s_and(x["delta"], a_l[k - 1], LinearExpr.constant(pj.a_r[k - 1]), V))
            emit("zeta", s_leq(x["mu"], d[k - 1], world.d_hat, V, eps)
                 + s_geq(x["nu"], d[k - 1], -world.d_hat, V, eps)
                 + s_and(x["zeta"], x["mu"], x["nu"], V))
            emit("xi", s_and(x["xi"], x["alpha"], x["beta"], V))
            emit("products_fgh", s_product(x["f"], d[k], x["xi"], V) + s_product(x["g"], ds, x["alpha"], V)
                 + s_product(x["h"], d[k], x["alpha"], V))
            emit("safety", [Constraint.leq_zero(-2 * x["f"] + x["g"] + x["h"])])
            emit("products_km", s_product(x["k"], v[k], x["xi"], V) + s_product(x["m"], v[k], x["alpha"], V))
            if rules.free_space:
                emit("free_space", [Constraint.leq_zero(
                    2 * tau * (2 * x["k"] - x["m"]) - 2 * x["f"] + x["g"] + x["h"]
                    + 2 * tau * pj.v[k] * (x["alpha"] - 2 * x["xi"])
                )])
            emit("phi_psi", s_and(x["phi"], x["gamma"], x["delta"], V) + s_and(x["psi"], x["zeta"], x["phi"], V))
            emit("products_ps", s_product(x["p"], z[k - 1], x["psi"], V) + s_product(x["s"], z[k], x["psi"], V))
            if rules.lateral:
                emit("lane_freeze", [
                    Constraint.leq_zero(x["p"] - x["s"]),
                    Constraint.leq_zero(x["s"] - x["p"]),
                ])

    n_total = len(mb.vars)
    c_total = len(mb.rows)
    if rules.complete:
        n_expected, c_expected = expected_counts(T, len(nbrs))
        assert n_total == n_expected and c_total == c_expected, (n_total, c_total, n_expected, c_expected)
        per_block = sum(v for k, v in blocks.items() if k not in ("epigraph", "accel", "lane_gate", "xor"))
        assert per_block == AUX_ROWS_PER_BLOCK * T * len(nbrs)

    n_guard = c_guard = 0
    if guards and nbrs:
        n_guard, c_guard = _add_guards(mb, i, nbrs, params, states, plans, world, aux, z, a_r, v, rules, emit)

    instance = MilpInstance(q, list(mb.rows), list(mb.vars))
    return CompiledPlanProblem(
        instance=instance,
        symbols=dict(mb.symbols),
        vehicle=i,
        neighbors=nbrs,
        T=T,
        start=start,
        n_own=n_own,
        n_aux=n_total - n_own,
        c_total=c_total,
        n_guard=n_guard,
        c_guard=c_guard,
        row_blocks=blocks,
    )


def _add_guards(mb, i, nbrs, params, states, plans, world, aux, z, a_r, v, rules, emit):
    """Rows of each neighbour's problem that involve vehicle ``i``.

    Seen from ``j`` the pair quantities flip sign (``d_ji = -d_ij``,
    ``l_ji = -l_ij``), so ``j``'s same-lane flag equals ``alpha_ij`` and its
    ahead/behind flag is ``1 - beta_ij``.  Substituting that into ``j``'s gap
    and free-space rows gives ``i``'s rows with ``d_s`` of ``j`` in place of
    ``g``.  ``j``'s lateral rule only binds when ``j`` itself signals left
    and changes lane at that step; then ``i`` may not show the right
    indicator one lane above ``j`` within ``d_hat``.
    """
    T, tau, L, eps = world.T, world.tau, world.L, world.eps_strict
    n0, c0 = len(mb.vars), len(mb.rows)
    for j in nbrs:
        pj = plans[j]
        p_j = params[j]
        for k in range(1, T + 1):
            x = aux[(j, k)]
            ds_j = p_j.d0 + p_j.h * pj.v[k]
            emit("guard_safety", [Constraint.leq_zero(-2 * x["f"] + ds_j * x["alpha"] + x["h"])])
            if rules.free_space:
                emit("guard_free_space", [Constraint.leq_zero(
                    2 * tau * (2 * x["k"] - x["m"]) - 2 * x["f"] + ds_j * x["alpha"] + x["h"]
                    + 2 * tau * pj.v[k] * (x["alpha"] - 2 * x["xi"])
                )])
            if rules.lateral and pj.a_l[k - 1] == 1 and pj.z[k] != pj.z[k - 1]:
                # l_ij(k-1) == -1, i.e. i one lane above j
                l_prev = pj.z[k - 1] - z[k - 1]
                kap = mb.add_var("guard_kappa", BINARY, 0, 1, j=j, t=k, priority=1)
                lam = mb.add_var("guard_lambda", BINARY, 0, 1, j=j, t=k, priority=1)
                above = mb.add_var("guard_above", BINARY, 0, 1, j=j, t=k, priority=1)
                V = mb.vars
                emit("guard_lateral", s_leq(kap, l_prev, -1, V, eps) + s_geq(lam, l_prev, -1, V, eps)
                     + s_and(above, kap, lam, V)
                     + [Constraint.leq_zero(above + x["zeta"] + a_r[k - 1] - 2)])
    return len(mb.vars) - n0, len(mb.rows) - c0
