"""The mixed-integer potential game between neighbouring vehicles.

Each vehicle's cost is its epigraph value ``q``, the ∞-norm tracking error of
its plan, so the sum of costs is an exact potential.  Equilibria are sought by
sequential best responses (Gauss-Southwell): one player at a time re-solves
its MILP against the stored plans of the others and moves only if that gains
at least ``eps``.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from mipdrive.compiler import CompiledPlanProblem, MilpInstance, RuleSet, compile_vehicle_milp
from mipdrive.milp import FEASIBLE, MilpResult, SolverConfig, solve_milp
from mipdrive.model import Plan, VehicleParams, VehicleState, WorldParams, compute_neighborhoods
from mipdrive.simplex import OPTIMAL

CYCLIC = "cyclic"
RANDOM = "random"

Solver = Callable[[MilpInstance], MilpResult]


class ConvergenceError(RuntimeError):
    """The iteration guard fired before an equilibrium was certified."""

    def __init__(self, message: str, log: "IterationLog"):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class GameConfig:
    eps: float = 1e-3
    order: str = CYCLIC
    seed: int = 0
    max_iters: int = 500
    solver: SolverConfig = SolverConfig()
    rules: RuleSet = RuleSet()
    # carry the neighbours' rows so an accepted move keeps their plans feasible
    guards: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.order not in (CYCLIC, RANDOM):
            raise ValueError(f"unknown player order {self.order!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class BestResponse:
    status: str
    plan: Plan | None
    cost: float
    nodes: int
    wall_time: float
    problem: CompiledPlanProblem

    @property
    def ok(self) -> bool:
        return self.plan is not None


@dataclass
class LogEntry:
    k: int
    player: int
    improved: bool
    j_before: float
    j_after: float
    j_best: float
    p_after: float
    nodes: int
    wall_ms: float
    status: str = OPTIMAL
    phase: str = "gs"


@dataclass
class IterationLog:
    entries: list[LogEntry] = field(default_factory=list)

    def append(self, entry: LogEntry) -> None:
        self.entries.append(entry)

    @property
    def gs_entries(self) -> list[LogEntry]:
        return [e for e in self.entries if e.phase == "gs"]

    @property
    def iterations(self) -> int:
        """Best-response evaluations of the equilibrium search proper."""
        return len(self.gs_entries)

    @property
    def accepted(self) -> int:
        return sum(e.improved for e in self.gs_entries)

    def to_lines(self) -> list[str]:
        return [json.dumps(asdict(e), sort_keys=True) for e in self.entries]

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.to_lines():
                fh.write(line + "\n")

    @classmethod
    def read(cls, path) -> "IterationLog":
        with open(path, encoding="utf-8") as fh:
            return cls([LogEntry(**json.loads(line)) for line in fh if line.strip()])


@dataclass
class GameState:
    """Stored plans, their costs and the neighbourhoods they were built on."""

    plans: dict[int, Plan]
    costs: dict[int, float]
    neighborhoods: dict[int, tuple[int, ...]]

    @property
    def potential(self) -> float:
        return float(sum(self.costs.values()))


@dataclass(frozen=True)
class MineCheck:
    ok: bool
    slack: dict[int, float]
    best: dict[int, float]
    infeasible: tuple[int, ...] = ()


class Game:
    """One planning round: fixed current states, references and neighbourhoods."""

    def __init__(
        self,
        params: Mapping[int, VehicleParams],
        states: Mapping[int, VehicleState],
        world: WorldParams,
        *,
        start: int = 0,
        config: GameConfig = GameConfig(),
    ):
        if not params:
            raise ValueError("a game needs at least one vehicle")
        if set(params) != set(states):
            raise ValueError("params and states must cover the same vehicles")
        self.params = dict(params)
        self.states = dict(states)
        self.world = world
        self.start = start
        self.config = config
        self.ids = sorted(params)
        sets = compute_neighborhoods([states[i].pos for i in self.ids], world.d_bar)
        self.neighborhoods = {
            i: tuple(self.ids[j] for j in sorted(sets[n])) for n, i in enumerate(self.ids)
        }

    def compile(self, i: int, plans: Mapping[int, Plan], guards: bool | None = None) -> CompiledPlanProblem:
        return compile_vehicle_milp(
            i, self.params, self.states, plans, self.world,
            neighbors=self.neighborhoods[i], start=self.start, rules=self.config.rules,
            guards=self.config.guards if guards is None else guards,
        )

    def cost(self, i: int, plan: Plan) -> float:
        return plan.tracking_cost(self.params[i], self.start)

    def completion(self, problem: CompiledPlanProblem, plan: Plan, solver: Solver | None = None) -> np.ndarray | None:
        """Auxiliaries consistent with ``plan``, or ``None`` if none exist."""
        if plan.v[0] != self.states[problem.vehicle].v or plan.z[0] != self.states[problem.vehicle].z:
            return None
        lo, hi = problem.physical_bounds(plan)
        inst = problem.instance.with_bounds(lo, hi)
        res = solver(inst) if solver else solve_milp(inst, self.config.solver, first_feasible=True)
        return res.x if res.x is not None and res.status in (OPTIMAL, FEASIBLE) else None

    def is_feasible(self, i: int, plans: Mapping[int, Plan], solver: Solver | None = None) -> bool:
        """Whether ``plans[i]`` satisfies i's own compiled rows given the others."""
        return self.completion(self.compile(i, plans, guards=False), plans[i], solver) is not None

    def best_response(self, i: int, plans: Mapping[int, Plan], *, seed_current: bool = True,
                      first_feasible: bool = False) -> BestResponse:
        """Optimal plan of ``i`` against the stored plans of its neighbours.

        When ``seed_current`` is set the current plan of ``i`` (if still
        feasible) is handed to branch and bound as the first incumbent, which
        only prunes; the optimum is unaffected.  ``first_feasible`` returns
        any feasible plan instead (used to repair an infeasible start).
        """
        t0 = time.perf_counter()
        problem = self.compile(i, plans)
        incumbent = None
        if seed_current and i in plans:
            incumbent = self.completion(problem, plans[i])
        res = solve_milp(problem.instance, self.config.solver, incumbent=incumbent, first_feasible=first_feasible)
        wall = time.perf_counter() - t0
        if res.x is None or res.status not in (OPTIMAL, FEASIBLE):
            return BestResponse(res.status, None, math.inf, res.nodes, wall, problem)
        plan = problem.plan_from(res.x, self.states[i])
        plan.q = self.cost(i, plan)
        return BestResponse(res.status, plan, plan.q, res.nodes, wall, problem)

    def hold_plans(self) -> dict[int, Plan]:
        return {i: Plan.hold(self.states[i], self.world.T) for i in self.ids}

    def state_of(self, plans: Mapping[int, Plan]) -> GameState:
        plans = {i: plans[i] for i in self.ids}
        return GameState(plans, {i: self.cost(i, plans[i]) for i in self.ids}, dict(self.neighborhoods))


def initialize(game: Game, candidates: Iterable[Mapping[int, Plan]] = (), log: IterationLog | None = None) -> GameState:
    """A jointly feasible starting point.

    Each vehicle takes the first candidate plan that is feasible against the
    others (the hold plan is always tried last).  Vehicles left without one are
    repaired by a best response, logged with ``phase="init"``.
    """
    log = log if log is not None else IterationLog()
    options = [dict(c) for c in candidates] + [game.hold_plans()]
    plans = {i: options[0].get(i, options[-1][i]) for i in game.ids}
    for i in game.ids:
        for opt in options:
            trial = dict(plans)
            trial[i] = opt.get(i, options[-1][i])
            if game.is_feasible(i, trial):
                plans = trial
                break
    for i in game.ids:
        if game.is_feasible(i, plans):
            continue
        before = game.cost(i, plans[i])
        br = game.best_response(i, plans, seed_current=False, first_feasible=True)
        if br.ok:
            plans[i] = br.plan
        state = game.state_of(plans)
        log.append(LogEntry(
            k=len(log.entries), player=i, improved=br.ok, j_before=before,
            j_after=state.costs[i], j_best=br.cost, p_after=state.potential,
            nodes=br.nodes, wall_ms=br.wall_time * 1e3, status=br.status, phase="init",
        ))
    return game.state_of(plans)


def gauss_southwell(game: Game, initial: GameState | None = None, log: IterationLog | None = None) -> tuple[GameState, IterationLog]:
    """Sequential ε-improving best responses until nobody can gain ``eps``.

    A player is settled once its best response against the current plans
    gains less than ``eps``, or right after it moves to that best response.
    Only a move by a neighbour can unsettle it again, so settled players are
    skipped and the loop ends when everyone is settled.
    """
    cfg = game.config
    log = log if log is not None else IterationLog()
    state = initial if initial is not None else initialize(game, log=log)
    plans = dict(state.plans)
    costs = dict(state.costs)
    rng = random.Random(cfg.seed)
    settled: set[int] = set()
    k = 0
    while True:
        order = list(game.ids)
        if cfg.order == RANDOM:
            rng.shuffle(order)
        for i in order:
            if i in settled:
                continue
            if k >= cfg.max_iters:
                raise ConvergenceError(f"no equilibrium after {k} best responses", log)
            k += 1
            before = costs[i]
            br = game.best_response(i, plans)
            improved = br.ok and before - br.cost >= cfg.eps
            if improved:
                plans[i] = br.plan
                costs[i] = br.cost
                settled.difference_update(game.neighborhoods[i])
            settled.add(i)
            log.append(LogEntry(
                k=k, player=i, improved=improved, j_before=before, j_after=costs[i],
                j_best=br.cost, p_after=float(sum(costs.values())), nodes=br.nodes,
                wall_ms=br.wall_time * 1e3, status=br.status,
            ))
            if len(settled) == len(game.ids):
                return GameState(plans, costs, dict(game.neighborhoods)), log


def check_eps_mine(game: Game, state: GameState, eps: float | None = None, solver: Solver | None = None) -> MineCheck:
    """Recompute every player's best response from scratch.

    ``solver`` defaults to the embedded branch and bound; passing another
    engine gives an independent certificate.  A player whose stored plan is
    infeasible against the others fails the check.
    """
    eps = game.config.eps if eps is None else eps
    solve = solver or (lambda inst: solve_milp(inst, game.config.solver))
    slack, best, bad = {}, {}, []
    for i in game.ids:
        if not game.is_feasible(i, state.plans, solve):
            bad.append(i)
            continue
        problem = game.compile(i, state.plans)
        res = solve(problem.instance)
        if not res.ok:
            bad.append(i)
            continue
        plan = problem.plan_from(res.x, game.states[i])
        best[i] = game.cost(i, plan)
        slack[i] = state.costs[i] - best[i]
    ok = not bad and all(s <= eps for s in slack.values())
    return MineCheck(ok, slack, best, tuple(bad))
