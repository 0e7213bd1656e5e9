import numpy as np
import pytest

from mipdrive.compiler import compile_vehicle_milp
from mipdrive.harness.scenario import load_scenario, shipped
from mipdrive.lpformat import LpFormatError, dumps, loads, read_lp, write_lp
from mipdrive.milp import solve_milp_highs
from mipdrive.model import Plan

from oracles import random_milp


def _compiled():
    sc = load_scenario(shipped("fig4_longitudinal"))
    plans = {i: Plan.hold(s, sc.world.T) for i, s in sc.states.items()}
    return compile_vehicle_milp(1, sc.params, sc.states, plans, sc.world).instance


def test_round_trip_is_exact(tmp_path):
    inst = _compiled()
    path = write_lp(inst, tmp_path / "v1.lp")
    back = read_lp(path)
    assert dumps(back) == path.read_text()
    a, b = inst.arrays, back.arrays
    for name in ("c", "A", "b", "lo", "hi", "integer", "priority"):
        assert np.array_equal(getattr(a, name), getattr(b, name)), name
    assert a.c0 == b.c0
    assert [r.name for r in back.constraints] == [r.name for r in inst.constraints]
    assert [(v.tag, v.j, v.t) for v in back.vars] == [(v.tag, v.j, v.t) for v in inst.vars]


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_preserves_optimum(seed):
    inst = random_milp(seed)
    back = loads(dumps(inst))
    a, b = solve_milp_highs(inst), solve_milp_highs(back)
    assert a.status == b.status
    if a.ok:
        assert a.objective == b.objective


def test_layout():
    text = dumps(_compiled())
    lines = text.splitlines()
    assert lines[0].startswith("\\ mipdrive milp: 76 vars, 228 rows")
    for section in ("Minimize", "Subject To", "Bounds", "General", "Binary", "End"):
        assert section in lines
    assert any(line.startswith(" r0: ") for line in lines)


@pytest.mark.parametrize("text, message", [
    ("Minimize\n obj: + 1.0 x\nBounds\n 0 <= x <= 1\n", "End"),
    ("Minimize\n obj: + 1.0 y\nBounds\n 0 <= x <= 1\nEnd\n", "unknown variable"),
    ("Minimize\n obj: + 1.0 x\nSubject To\n r0: + 1.0 x >= 1\nBounds\n 0 <= x <= 1\nEnd\n", "<="),
    ("Minimize\n obj: + 1.0 x\nBounds\n 0 <= x\nEnd\n", "lo <= name <= hi"),
])
def test_malformed_input(text, message):
    with pytest.raises(LpFormatError, match=message):
        loads(text)
