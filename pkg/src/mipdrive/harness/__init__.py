"""Scenario loading, simulation, safety monitors, traces and the CLI."""

from mipdrive.harness.monitors import Verdict, Violation, check_consecutive_lane_safety, check_longitudinal_safety
from mipdrive.harness.scenario import Scenario, ScenarioError, load_scenario, shipped
from mipdrive.harness.sim import SimConfig, SimResult, plan_round, simulate, step_world
from mipdrive.harness.trace import RoundMeta, Trace, TraceRow, emit_trace, parse_trace

__all__ = [
    "RoundMeta", "Scenario", "ScenarioError", "SimConfig", "SimResult", "Trace", "TraceRow", "Verdict",
    "Violation", "check_consecutive_lane_safety", "check_longitudinal_safety", "emit_trace",
    "load_scenario", "parse_trace", "plan_round", "shipped", "simulate", "step_world",
]
