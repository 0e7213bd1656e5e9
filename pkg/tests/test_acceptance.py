"""The eight acceptance criteria, each at its stated tolerance.

Tests are named ``test_criterion_<n>_...``; conftest.py folds their outcomes
into one PASS/FAIL line per criterion.
"""

import itertools
import math
import time

import numpy as np
import pytest

from mipdrive.compiler import (
    BINARY,
    CONTINUOUS,
    LinearExpr,
    RuleSet,
    VarInfo,
    compile_vehicle_milp,
    s_and,
    s_geq,
    s_leq,
    s_or,
    s_product,
)
from mipdrive.game import Game, GameConfig, check_eps_mine, gauss_southwell, initialize
from mipdrive.harness.monitors import check_consecutive_lane_safety, check_longitudinal_safety
from mipdrive.harness.scenario import load_scenario, shipped
from mipdrive.harness.sim import SimConfig, simulate
from mipdrive.milp import solve_milp, solve_milp_highs
from mipdrive.model import Plan, VehicleParams, VehicleState, WorldParams, safety_distance

from oracles import milp_by_enumeration, random_milp, random_pair_instance, rule_based_best_response

FEAS_TOL = 1e-6


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


# --- 1. longitudinal conflict ------------------------------------------------------

def test_criterion_1_free_space_off_is_flagged():
    sc = load_scenario(shipped("fig4_longitudinal"))
    res, wall = timed(simulate, sc, SimConfig(rules=RuleSet(free_space=False)))
    verdict = check_longitudinal_safety(res.trace, sc.params)
    assert not verdict.ok
    assert wall < 5.0


def test_criterion_1_rules_on_keep_the_gap():
    sc = load_scenario(shipped("fig4_longitudinal"))
    assert sc.steps == 20 and all(p.h == 0 for p in sc.params.values())
    res, wall = timed(simulate, sc)
    assert len(res.trace.by_step()) == 21
    verdict = check_longitudinal_safety(res.trace, sc.params)
    assert verdict.ok and verdict.min_margin >= -FEAS_TOL
    # the same margin recomputed straight from the trace
    margin = math.inf
    for step in res.trace.by_step():
        rear, front = step[1], step[2]
        margin = min(margin, front.pos - rear.pos - safety_distance(rear.v, sc.params[1].d0, sc.params[1].h))
    assert margin >= -FEAS_TOL
    assert wall < 5.0


# --- 2. lateral conflict -----------------------------------------------------------

def test_criterion_2_lateral_rule_prevents_the_swap():
    sc = load_scenario(shipped("fig3_swap"))
    (p1, s1), (p2, s2) = sc.vehicles
    assert abs(s1.pos - s2.pos) <= sc.world.d_hat and abs(s1.z - s2.z) == 1
    assert p1.z_ref[0] == s2.z and p2.z_ref[0] == s1.z
    res, wall = timed(simulate, sc)
    lower = min(sc.states, key=lambda i: sc.states[i].z)
    first = res.rounds[0].state.plans[lower]
    assert first.z[1] == first.z[0] == sc.states[lower].z
    assert check_consecutive_lane_safety(res.trace, sc.world.d_hat).ok
    assert wall < 5.0


def test_criterion_2_without_lateral_rule_the_swap_is_flagged():
    sc = load_scenario(shipped("fig3_swap"))
    res, wall = timed(simulate, sc, SimConfig(rules=RuleSet(lateral=False)))
    steps = res.trace.by_step()
    assert steps[1][1].z == steps[0][2].z and steps[1][2].z == steps[0][1].z
    verdict = check_consecutive_lane_safety(res.trace, sc.world.d_hat)
    assert not verdict.ok and verdict.first.kind == "lane swap side by side"
    assert wall < 5.0


# --- 3. count formulas ---------------------------------------------------------------

@pytest.mark.parametrize("T, n", list(itertools.product(range(1, 5), range(0, 4))))
def test_criterion_3_counts(T, n):
    world = WorldParams(L=3, T=T, tau=1.0, d_bar=100.0, d_hat=20.0)
    params = {k: VehicleParams(k, 36.0, 4.0, 1.5, 5.0, 0.2, (20.0,), (1 + k % 3,)) for k in range(n + 1)}
    states = {k: VehicleState(30.0 * k, 18.0 + k, 1 + k % 3) for k in range(n + 1)}
    plans = {k: Plan.hold(states[k], T) for k in states}
    inst = compile_vehicle_milp(0, params, states, plans, world).instance
    assert inst.n_vars == 1 + T * (21 * n + 4)
    assert inst.n_rows == T * (67 * n + 9)


# --- 4. solver oracle equivalence ------------------------------------------------------

def test_criterion_4_random_milps_match_enumeration():
    t0 = time.perf_counter()
    verdicts = []
    for seed in range(30):
        inst = random_milp(seed)
        arr = inst.arrays
        assert arr.integer.sum() <= 12 and (~arr.integer).sum() <= 10
        assert np.all(np.isfinite(arr.lo)) and np.all(np.isfinite(arr.hi))
        expect = milp_by_enumeration(arr.c, arr.c0, arr.A, arr.b, arr.lo, arr.hi, arr.integer)
        res = solve_milp(inst)
        verdicts.append(math.isinf(expect))
        assert (not res.ok) == math.isinf(expect), seed
        if res.ok:
            assert abs(res.objective - expect) <= 1e-6, seed
    assert any(verdicts) and not all(verdicts)
    assert time.perf_counter() - t0 < 30.0


# --- 5. S-pattern truth tables -----------------------------------------------------------

EPS = 1e-4


def _box(*bounds):
    return [VarInfo(k, kind, lo, hi, f"x{k}") for k, (kind, lo, hi) in enumerate(bounds)]


def _holds(rows, point):
    return all(r.activity(point) <= r.rhs + 1e-12 for r in rows)


@pytest.mark.parametrize("c", [-5.0, -1.5, 0.0, 2.0, 5.0])
def test_criterion_5_comparisons(c):
    V = _box((CONTINUOUS, -5, 5), (BINARY, 0, 1))
    geq = s_geq(LinearExpr.var(1), LinearExpr.var(0), c, V, EPS)
    leq = s_leq(LinearExpr.var(1), LinearExpr.var(0), c, V, EPS)
    grid = set(np.linspace(-5, 5, 41)) | {c, c - EPS, c + EPS, c - EPS / 2, c + EPS / 2}
    for x in sorted(p for p in grid if -5 <= p <= 5):
        geq_ok = {d for d in (0, 1) if _holds(geq, [x, d])}
        leq_ok = {d for d in (0, 1) if _holds(leq, [x, d])}
        assert geq_ok == ({1} if x >= c else {0} if x <= c - EPS else set()), x
        assert leq_ok == ({1} if x <= c else {0} if x >= c + EPS else set()), x


@pytest.mark.parametrize("pattern, truth", [(s_and, lambda a, b: a and b), (s_or, lambda a, b: a or b)])
def test_criterion_5_connectives(pattern, truth):
    V = _box((BINARY, 0, 1), (BINARY, 0, 1), (BINARY, 0, 1))
    rows = pattern(LinearExpr.var(0), LinearExpr.var(1), LinearExpr.var(2), V)
    for d, s, g in itertools.product((0, 1), repeat=3):
        assert _holds(rows, [d, s, g]) == (d == int(truth(s, g)))


@pytest.mark.parametrize("lo, hi", [(-5, 5), (1, 4), (-3, -1)])
def test_criterion_5_implication_product(lo, hi):
    glo, ghi = min(lo, 0), max(hi, 0)
    V = _box((CONTINUOUS, lo, hi), (BINARY, 0, 1), (CONTINUOUS, glo, ghi))
    rows = s_product(LinearExpr.var(2), LinearExpr.var(0), LinearExpr.var(1), V)
    xs = np.linspace(lo, hi, 11)
    gs = sorted(set(np.linspace(glo, ghi, 21)) | set(xs) | {0.0})
    for x, d, g in itertools.product(xs, (0, 1), gs):
        assert _holds(rows, [x, d, g]) == math.isclose(g, d * x, abs_tol=1e-12)


# --- 6. GS convergence, 7. potential descent --------------------------------------------

LIMITS = {"fig3_swap": 10, "fig4_longitudinal": 10, "fig6_multilane": 36, "nine_vehicle": 54}


@pytest.fixture(scope="module")
def round0_runs():
    runs, wall = {}, 0.0
    for name in LIMITS:
        sc = load_scenario(shipped(name))
        t0 = time.perf_counter()
        game = Game(sc.params, sc.states, sc.world, config=GameConfig(eps=sc.world.eps_game))
        init = initialize(game)
        state, log = gauss_southwell(game, init)
        check = check_eps_mine(game, state, solver=solve_milp_highs)
        wall += time.perf_counter() - t0
        runs[name] = (game, init, state, log, check)
    return runs, wall


def test_criterion_6_gs_convergence(round0_runs):
    runs, wall = round0_runs
    for name, (game, _, state, log, check) in runs.items():
        assert log.iterations <= LIMITS[name], (name, log.iterations)
        assert check.ok and not check.infeasible, name
        assert max(check.slack.values()) <= game.config.eps, name
    assert wall < 60.0


def _descent_from_log(log, p0, eps):
    p_prev = p0
    for e in log.gs_entries:
        if e.improved:
            assert e.j_before - e.j_after >= eps
            assert p_prev - e.p_after >= eps - 1e-9
        else:
            assert e.p_after == pytest.approx(p_prev, abs=1e-12)
        assert e.p_after <= p_prev + 1e-12
        p_prev = e.p_after


def test_criterion_7_potential_descent_round0(round0_runs):
    runs, _ = round0_runs
    for name, (game, init, _, log, _) in runs.items():
        assert log.accepted > 0, name
        _descent_from_log(log, init.potential, game.config.eps)


@pytest.mark.parametrize("name", ["fig3_swap", "fig4_longitudinal"])
def test_criterion_7_potential_descent_every_round(name):
    sc = load_scenario(shipped(name))
    res = simulate(sc)
    for rec in res.rounds:
        gs = rec.log.gs_entries
        if not gs:
            continue
        # the potential before the first move is recoverable from the first entry
        first = gs[0]
        p0 = first.p_after + (first.j_before - first.j_after)
        _descent_from_log(rec.log, p0, rec.game.config.eps)


# --- 8. best-response oracle -------------------------------------------------------------

@pytest.mark.parametrize("seed", range(12))
def test_criterion_8_best_response_matches_enumeration(seed):
    params, states, plan_j, world = random_pair_instance(seed, T=2)
    assert world.T == 2
    game = Game(params, states, world)
    br = game.best_response(1, {2: plan_j}, seed_current=False)
    expect, _ = rule_based_best_response(1, 2, params, states, plan_j, world)
    if math.isinf(expect):
        assert not br.ok
    else:
        assert br.ok and abs(br.cost - expect) <= 1e-6
