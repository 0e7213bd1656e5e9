"""Scenario files (YAML) and their validation."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from mipdrive.model import VehicleParams, VehicleState, WorldParams, safety_distance

WORLD_KEYS = ("L", "T", "tau", "d_bar", "d_hat")
VEHICLE_KEYS = ("id", "pos", "v", "z", "v_max", "delta", "r", "d0", "h", "v_ref", "z_ref")


class ScenarioError(ValueError):
    """Raised with every problem found, one per line."""

    def __init__(self, problems: list[str]):
        super().__init__("\n".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class Scenario:
    world: WorldParams
    vehicles: tuple[tuple[VehicleParams, VehicleState], ...]
    steps: int = 20
    seed: int = 0
    player_order: str = "cyclic"
    name: str = ""

    @property
    def params(self) -> dict[int, VehicleParams]:
        return {p.id: p for p, _ in self.vehicles}

    @property
    def states(self) -> dict[int, VehicleState]:
        return {p.id: s for p, s in self.vehicles}


def validate(world: WorldParams, vehicles, steps: int, player_order: str) -> list[str]:
    problems = []
    if not vehicles:
        problems.append("scenario has no vehicles")
    if steps < 0:
        problems.append(f"sim.steps must be >= 0 (got {steps})")
    if player_order not in ("cyclic", "random"):
        problems.append(f"sim.player_order must be 'cyclic' or 'random' (got {player_order!r})")
    seen = set()
    for p, s in vehicles:
        if p.id in seen:
            problems.append(f"duplicate vehicle id {p.id}")
        seen.add(p.id)
        problems += [f"vehicle {p.id}: {msg}" for msg in s.problems(p, world.L)]
        for z in p.z_ref:
            if not 1 <= z <= world.L:
                problems.append(f"vehicle {p.id}: z_ref entry {z} outside 1..{world.L}")
    for a, (pi, si) in enumerate(vehicles):
        for pj, sj in vehicles[a + 1:]:
            if si.z != sj.z:
                continue
            gap = abs(sj.pos - si.pos)
            for p, s in ((pi, si), (pj, sj)):
                need = safety_distance(s.v, p.d0, p.h)
                if gap < need:
                    problems.append(
                        f"vehicles {pi.id} and {pj.id} share lane {si.z} with gap {gap:g} "
                        f"below the safety distance {need:g} of vehicle {p.id}"
                    )
    return problems


def _number(raw, key, where, problems, cast=float):
    if key not in raw:
        problems.append(f"{where}: missing key '{key}'")
        return None
    try:
        return cast(raw[key])
    except (TypeError, ValueError):
        problems.append(f"{where}: '{key}' is not a valid {cast.__name__} ({raw[key]!r})")
        return None


def scenario_from_dict(data, name: str = "") -> Scenario:
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ScenarioError(["top level must be a mapping with keys world, vehicles, sim"])
    w = data.get("world") or {}
    if not isinstance(w, dict):
        raise ScenarioError(["'world' must be a mapping"])
    wvals = {k: _number(w, k, "world", problems, int if k in ("L", "T") else float) for k in WORLD_KEYS}
    for k in ("eps_game", "eps_strict"):
        if k in w:
            wvals[k] = _number(w, k, "world", problems)
    world = None
    if not problems:
        try:
            world = WorldParams(**wvals)
        except ValueError as exc:
            problems.append(f"world: {exc}")
    raw_vehicles = data.get("vehicles")
    if raw_vehicles is None:
        raw_vehicles = []
    if not isinstance(raw_vehicles, list):
        problems.append("'vehicles' must be a list")
        raw_vehicles = []
    vehicles = []
    for n, rv in enumerate(raw_vehicles):
        where = f"vehicles[{n}]"
        if not isinstance(rv, dict):
            problems.append(f"{where}: must be a mapping")
            continue
        before = len(problems)
        vals = {}
        for k in VEHICLE_KEYS:
            if k in ("v_ref", "z_ref"):
                ref = rv.get(k)
                if ref is None:
                    problems.append(f"{where}: missing key '{k}'")
                    continue
                vals[k] = ref if isinstance(ref, list) else [ref]
            else:
                vals[k] = _number(rv, k, where, problems, int if k in ("id", "z") else float)
        if len(problems) > before:
            continue
        try:
            params = VehicleParams(vals["id"], vals["v_max"], vals["delta"], vals["r"], vals["d0"], vals["h"],
                                   tuple(vals["v_ref"]), tuple(vals["z_ref"]))
        except (TypeError, ValueError) as exc:
            problems.append(f"{where}: {exc}")
            continue
        state = VehicleState(vals["pos"], vals["v"], vals["z"], int(rv.get("a_l", 0)), int(rv.get("a_r", 0)))
        vehicles.append((params, state))
    sim = data.get("sim") or {}
    steps = int(sim.get("steps", 20))
    seed = int(sim.get("seed", 0))
    order = str(sim.get("player_order", "cyclic"))
    if world is not None:
        problems += validate(world, vehicles, steps, order)
    elif not raw_vehicles:
        problems.append("scenario has no vehicles")
    if problems:
        raise ScenarioError(problems)
    return Scenario(world, tuple(vehicles), steps, seed, order, name)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file; errors carry file and line."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = f":{mark.line + 1}:{mark.column + 1}" if mark else ""
        raise ScenarioError([f"{path}{line}: {exc.problem or exc}"]) from exc
    try:
        return scenario_from_dict(data, name=path.stem)
    except ScenarioError as exc:
        raise ScenarioError([f"{path}: {p}" for p in exc.problems]) from None


def shipped(name: str) -> Path:
    """Path of a scenario shipped with the package (``fig3_swap`` etc.)."""
    ref = resources.files("mipdrive.scenarios").joinpath(f"{name}.yaml")
    return Path(str(ref))


def shipped_names() -> list[str]:
    root = resources.files("mipdrive.scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))
