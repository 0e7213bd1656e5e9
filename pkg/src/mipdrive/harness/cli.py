"""Command line entry point.

Exit codes: 0 safe and converged, 1 bad input, 2 safety violation,
3 no equilibrium within the iteration guard.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from mipdrive.compiler import RuleSet
from mipdrive.game import ConvergenceError, GameConfig
from mipdrive.harness.monitors import check_consecutive_lane_safety, check_longitudinal_safety
from mipdrive.harness.scenario import Scenario, ScenarioError, load_scenario, shipped, shipped_names
from mipdrive.harness.sim import EVERY_STEP, PER_WINDOW, SimConfig, plan_round, simulate
from mipdrive.harness.trace import emit_trace, parse_trace
from mipdrive.lpformat import write_lp
from mipdrive.model import VehicleState

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNSAFE = 2
EXIT_NO_EQUILIBRIUM = 3


def _scenario(arg: str) -> Scenario:
    path = Path(arg)
    if not path.exists() and arg in shipped_names():
        path = shipped(arg)
    return load_scenario(path)


def _rules(disabled: list[str] | None) -> RuleSet:
    disabled = set(disabled or [])
    return RuleSet(free_space="free-space" not in disabled, lateral="lateral" not in disabled)


def _report(trace, scenario: Scenario) -> int:
    lon = check_longitudinal_safety(trace, scenario.params)
    lat = check_consecutive_lane_safety(trace, scenario.world.d_hat)
    print(f"longitudinal safety: {'ok' if lon.ok else 'VIOLATED'} (min margin {lon.min_margin:g})")
    for v in lon.violations[:5]:
        print(f"  {v}")
    print(f"consecutive-lane safety: {'ok' if lat.ok else 'VIOLATED'}")
    for v in lat.violations[:5]:
        print(f"  {v}")
    return EXIT_OK if lon.ok and lat.ok else EXIT_UNSAFE


def cmd_simulate(args) -> int:
    sc = _scenario(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = sc.name or "trace"
    try:
        result = simulate(sc, SimConfig(replan=args.replan, rules=_rules(args.disable_rule)), steps=args.steps)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_EQUILIBRIUM
    path = emit_trace(result.trace, out / f"{name}.csv")
    with open(out / f"{name}.log.jsonl", "w", encoding="utf-8") as fh:
        for rec in result.rounds:
            for entry in rec.log.entries:
                fh.write(json.dumps({"round": rec.round, **asdict(entry)}, sort_keys=True) + "\n")
    for m in result.trace.rounds:
        print(f"round {m.round}: {m.iterations} iterations, potential {m.potential:.6g}, {m.wall_ms:.0f} ms")
    print(f"wrote {path} and {path.with_suffix('.game')}")
    return _report(result.trace, sc)


def cmd_solve_once(args) -> int:
    sc = _scenario(args.scenario)
    gcfg = GameConfig(eps=sc.world.eps_game, order=sc.player_order, seed=sc.seed)
    states, start = sc.states, 0
    if args.round > 0:
        # advance with every-step replanning up to the requested round
        result = simulate(sc, SimConfig(rules=_rules(args.disable_rule)), steps=args.round)
        last = result.trace.by_step()[-1]
        states = {i: VehicleState(r.pos, r.v, r.z, r.a_l, r.a_r) for i, r in last.items()}
        start = args.round
    try:
        game, state, log = plan_round(sc.params, states, sc.world, start=start,
                                      config=replace(gcfg, rules=_rules(args.disable_rule)))
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_EQUILIBRIUM
    print(f"round {args.round}: {log.iterations} iterations, {log.accepted} accepted, potential {state.potential:.6g}")
    for i in game.ids:
        p = state.plans[i]
        print(f"  vehicle {i}: J={state.costs[i]:.6g} v={[round(x, 4) for x in p.v]} z={p.z} a_l={p.a_l} a_r={p.a_r}")
    if args.dump_milp:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for i in game.ids:
            problem = game.compile(i, state.plans, guards=False)
            path = write_lp(problem.instance, out / f"round{args.round}_vehicle{i}.lp")
            print(f"  wrote {path} ({problem.instance.n_vars} vars, {problem.instance.n_rows} rows)")
    return EXIT_OK


def cmd_check(args) -> int:
    sc = _scenario(args.scenario)
    trace = parse_trace(args.trace, tau=sc.world.tau)
    return _report(trace, sc)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mipdrive", description="Mixed-integer game planning for highway driving.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a receding-horizon simulation and write its trace")
    p.add_argument("scenario", help="scenario file, or the name of a shipped scenario")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--disable-rule", action="append", choices=["free-space", "lateral"])
    p.add_argument("--replan", choices=[EVERY_STEP, PER_WINDOW], default=EVERY_STEP)
    p.add_argument("--steps", type=int, default=None, help="override the scenario's step count")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve-once", help="plan a single round and print the equilibrium")
    p.add_argument("scenario")
    p.add_argument("--round", type=int, default=0)
    p.add_argument("--dump-milp", action="store_true", help="write each vehicle's MILP in LP format")
    p.add_argument("--out", default=".", help="directory for --dump-milp files")
    p.add_argument("--disable-rule", action="append", choices=["free-space", "lateral"])
    p.set_defaults(func=cmd_solve_once)

    p = sub.add_parser("check", help="run the safety monitors on a trace file")
    p.add_argument("trace")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
