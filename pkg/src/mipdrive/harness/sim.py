"""Receding-horizon simulation: plan a round, apply it, replan."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Mapping

from mipdrive.compiler import RuleSet
from mipdrive.game import Game, GameConfig, GameState, IterationLog, gauss_southwell, initialize
from mipdrive.harness.scenario import Scenario
from mipdrive.harness.trace import RoundMeta, Trace, TraceRow
from mipdrive.model import Plan, VehicleParams, VehicleState, WorldParams

EVERY_STEP = "every-step"
PER_WINDOW = "per-window"


@dataclass(frozen=True)
class SimConfig:
    replan: str = EVERY_STEP
    rules: RuleSet = RuleSet()
    game: GameConfig | None = None

    def __post_init__(self):
        if self.replan not in (EVERY_STEP, PER_WINDOW):
            raise ValueError(f"unknown replanning cadence {self.replan!r}")


@dataclass
class RoundRecord:
    round: int
    step: int
    game: Game
    state: GameState
    log: IterationLog
    wall_ms: float


@dataclass
class SimResult:
    trace: Trace
    rounds: list[RoundRecord] = field(default_factory=list)


def plan_round(
    params: Mapping[int, VehicleParams],
    states: Mapping[int, VehicleState],
    world: WorldParams,
    *,
    start: int = 0,
    config: GameConfig = GameConfig(),
    previous: Mapping[int, Plan] | None = None,
) -> tuple[Game, GameState, IterationLog]:
    """Neighbourhoods from current positions, then an equilibrium search.

    ``previous`` plans (already shifted to the current states) are tried as
    the starting point before the hold plans.
    """
    game = Game(params, states, world, start=start, config=config)
    log = IterationLog()
    init = initialize(game, [previous] if previous else [], log)
    state, log = gauss_southwell(game, init, log)
    return game, state, log


def step_world(states: Mapping[int, VehicleState], plans: Mapping[int, Plan], tau: float, k: int = 0) -> dict[int, VehicleState]:
    """Apply step ``k -> k+1`` of every plan.

    Positions advance with the speed held during the step, so gaps follow
    ``d(k+1) = d(k) + tau (v_j(k) - v_i(k))``.
    """
    out = {}
    for i, s in states.items():
        p = plans[i]
        out[i] = VehicleState(
            pos=s.pos + tau * p.v[k],
            v=float(p.v[k + 1]),
            z=int(p.z[k + 1]),
            a_l=int(p.a_l[k]),
            a_r=int(p.a_r[k]),
        )
    return out


def _rows(states: Mapping[int, VehicleState], step: int, tau: float) -> list[TraceRow]:
    return [TraceRow(step * tau, i, s.pos, s.v, s.z, s.a_l, s.a_r) for i, s in sorted(states.items())]


def simulate(scenario: Scenario, config: SimConfig = SimConfig(), steps: int | None = None) -> SimResult:
    """Run ``steps`` (default: the scenario's) steps; the trace has ``steps + 1`` time points."""
    world = scenario.world
    steps = scenario.steps if steps is None else steps
    gcfg = config.game or GameConfig(eps=world.eps_game, order=scenario.player_order, seed=scenario.seed)
    gcfg = replace(gcfg, rules=config.rules)
    params = scenario.params
    states = scenario.states
    trace = Trace(world.tau, _rows(states, 0, world.tau))
    result = SimResult(trace)
    plans: dict[int, Plan] | None = None
    offset = 0
    for step in range(steps):
        window_done = plans is None or config.replan == EVERY_STEP or offset >= world.T
        if window_done:
            previous = None
            if plans is not None and config.replan == EVERY_STEP:
                previous = {i: plans[i].shifted(states[i]) for i in plans if i in states}
            t0 = time.perf_counter()
            game, gstate, log = plan_round(params, states, world, start=step,
                                           config=replace(gcfg, seed=gcfg.seed + step), previous=previous)
            wall = (time.perf_counter() - t0) * 1e3
            n = len(result.rounds)
            result.rounds.append(RoundRecord(n, step, game, gstate, log, wall))
            trace.rounds.append(RoundMeta(n, log.iterations, gstate.potential, wall))
            plans = gstate.plans
            offset = 0
        states = step_world(states, plans, world.tau, offset)
        offset += 1
        trace.rows.extend(_rows(states, step + 1, world.tau))
    return result
