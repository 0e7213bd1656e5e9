import math

import pytest

from mipdrive.compiler import RuleSet
from mipdrive.game import (
    RANDOM,
    ConvergenceError,
    Game,
    GameConfig,
    GameState,
    IterationLog,
    check_eps_mine,
    gauss_southwell,
    initialize,
)
from mipdrive.harness.scenario import load_scenario, shipped
from mipdrive.milp import solve_milp_highs
from mipdrive.model import Plan, VehicleParams, VehicleState, WorldParams, safety_distance, update_distance

from oracles import random_pair_instance, rule_based_best_response


def vehicle(i, v_ref, z_ref, **kw):
    base = dict(v_max=36.0, delta=4.0, r=2.0, d0=10.0, h=0.0)
    base.update(kw)
    return VehicleParams(i, v_ref=(v_ref,), z_ref=(z_ref,), **base)


def decoupled():
    world = WorldParams(L=3, T=3, tau=1.0, d_bar=50.0, d_hat=20.0)
    params = {1: vehicle(1, 24.0, 2), 2: vehicle(2, 18.0, 3), 3: vehicle(3, 23.0, 2)}
    states = {1: VehicleState(0.0, 20.0, 1), 2: VehicleState(200.0, 20.0, 2), 3: VehicleState(400.0, 20.0, 1)}
    return Game(params, states, world)


def test_single_vehicle_reachable_reference_costs_nothing():
    world = WorldParams(L=2, T=3, tau=1.0, d_bar=50.0, d_hat=20.0)
    game = Game({1: vehicle(1, 22.0, 2)}, {1: VehicleState(0.0, 20.0, 1)}, world)
    br = game.best_response(1, game.hold_plans())
    assert br.ok and br.cost == pytest.approx(0.0, abs=1e-9)
    assert br.plan.z[1:] == [2, 2, 2] and br.plan.v[-1] == pytest.approx(22.0)


@pytest.mark.parametrize("h", [0.0, 0.5])
def test_fast_follower_keeps_safety_gap(h):
    world = WorldParams(L=1, T=4, tau=1.0, d_bar=100.0, d_hat=20.0)
    params = {1: vehicle(1, 34.0, 1, h=h), 2: vehicle(2, 20.0, 1, h=h)}
    states = {1: VehicleState(0.0, 30.0, 1), 2: VehicleState(70.0, 20.0, 1)}
    game = Game(params, states, world)
    plans = game.hold_plans()
    br = game.best_response(1, plans)
    assert br.ok
    d = states[2].pos - states[1].pos
    for k in range(1, world.T + 1):
        d = update_distance(d, br.plan.v[k - 1], plans[2].v[k - 1], world.tau)
        assert d >= safety_distance(br.plan.v[k], params[1].d0, params[1].h) - 1e-6
        # free-space share: closing speed uses at most half the spare gap
        spare = d - safety_distance(br.plan.v[k], params[1].d0, params[1].h)
        assert 2 * world.tau * (br.plan.v[k] - plans[2].v[k]) <= spare + 1e-6


def test_infeasible_best_response_is_signalled():
    world = WorldParams(L=1, T=2, tau=1.0, d_bar=100.0, d_hat=20.0)
    params = {1: vehicle(1, 20.0, 1), 2: vehicle(2, 20.0, 1)}
    states = {1: VehicleState(0.0, 20.0, 1), 2: VehicleState(6.0, 20.0, 1)}
    game = Game(params, states, world)
    br = game.best_response(1, game.hold_plans())
    assert not br.ok and br.status == "infeasible" and math.isinf(br.cost)


def test_decoupled_one_pass_all_accepted():
    game = decoupled()
    state, log = gauss_southwell(game)
    assert log.iterations == 3 and log.accepted == 3
    check = check_eps_mine(game, state)
    assert check.ok and all(abs(s) <= 1e-9 for s in check.slack.values())


def test_decoupled_one_pass_from_optimum():
    game = decoupled()
    optimum, _ = gauss_southwell(game)
    state, log = gauss_southwell(game, optimum)
    assert log.iterations == 3 and log.accepted == 0
    assert state.plans == optimum.plans


def test_perturbation_breaks_equilibrium():
    game = decoupled()
    state, _ = gauss_southwell(game)
    p = state.plans[1]
    # slow down by the full window for the last step: cost grows well beyond eps
    worse = Plan(v=p.v[:-1] + [p.v[-2] - 4.0], z=list(p.z), a_l=list(p.a_l), a_r=list(p.a_r))
    plans = dict(state.plans)
    plans[1] = worse
    perturbed = game.state_of(plans)
    assert perturbed.costs[1] - state.costs[1] > game.config.eps
    check = check_eps_mine(game, perturbed)
    assert not check.ok and check.slack[1] > game.config.eps
    assert all(abs(check.slack[i]) <= 1e-9 for i in (2, 3))


def test_infeasible_stored_plan_fails_the_check():
    game = decoupled()
    state, _ = gauss_southwell(game)
    plans = dict(state.plans)
    p = plans[2]
    plans[2] = Plan(v=[p.v[0], p.v[0] + 9.0] + p.v[2:], z=list(p.z), a_l=list(p.a_l), a_r=list(p.a_r))
    check = check_eps_mine(game, game.state_of(plans))
    assert not check.ok and check.infeasible == (2,)


def test_exact_potential_identity():
    sc = load_scenario(shipped("fig6_multilane"))
    game = Game(sc.params, sc.states, sc.world)
    base = game.hold_plans()
    checked = 0
    for i in game.ids:
        br = game.best_response(i, base)
        if not br.ok:
            continue
        checked += 1
        alt = dict(base)
        alt[i] = br.plan
        lhs = game.state_of(base).potential - game.state_of(alt).potential
        rhs = game.cost(i, base[i]) - game.cost(i, br.plan)
        assert lhs == pytest.approx(rhs, abs=1e-12)
    assert checked >= 3


def test_potential_descends_along_accepted_steps():
    sc = load_scenario(shipped("fig6_multilane"))
    game = Game(sc.params, sc.states, sc.world)
    state, log = gauss_southwell(game)
    p_prev = sum(game.state_of(game.hold_plans()).costs.values())
    for e in log.gs_entries:
        if e.improved:
            assert e.j_before - e.j_after >= game.config.eps
            assert e.p_after == pytest.approx(p_prev - (e.j_before - e.j_after), abs=1e-9)
        else:
            assert e.p_after == pytest.approx(p_prev, abs=1e-12)
        p_prev = e.p_after
    assert state.potential == pytest.approx(p_prev)
    assert check_eps_mine(game, state, solver=solve_milp_highs).ok


def test_non_chosen_players_unchanged():
    sc = load_scenario(shipped("fig6_multilane"))
    game = Game(sc.params, sc.states, sc.world)
    init = initialize(game)
    state, log = gauss_southwell(game, init)
    moved = {e.player for e in log.gs_entries if e.improved}
    for i in game.ids:
        if i not in moved:
            assert state.plans[i] == init.plans[i]


def test_iteration_guard_raises_with_log():
    sc = load_scenario(shipped("fig6_multilane"))
    game = Game(sc.params, sc.states, sc.world, config=GameConfig(max_iters=2))
    with pytest.raises(ConvergenceError) as err:
        gauss_southwell(game)
    assert err.value.log.iterations == 2


def test_random_order_is_seeded():
    sc = load_scenario(shipped("fig6_multilane"))
    runs = []
    for _ in range(2):
        game = Game(sc.params, sc.states, sc.world, config=GameConfig(order=RANDOM, seed=5))
        _, log = gauss_southwell(game)
        runs.append([(e.player, e.improved, e.j_after) for e in log.entries])
    assert runs[0] == runs[1]


def test_log_round_trip(tmp_path):
    game = decoupled()
    _, log = gauss_southwell(game)
    path = tmp_path / "log.jsonl"
    log.write(path)
    assert IterationLog.read(path).entries == log.entries
    assert len(path.read_text().splitlines()) == len(log.entries)


def test_initialize_repairs_an_infeasible_start():
    # holding speed breaks the free-space rule at the last step
    world = WorldParams(L=1, T=3, tau=1.0, d_bar=100.0, d_hat=20.0)
    params = {1: vehicle(1, 30.0, 1), 2: vehicle(2, 10.0, 1)}
    states = {1: VehicleState(0.0, 30.0, 1), 2: VehicleState(90.0, 10.0, 1)}
    game = Game(params, states, world)
    assert not game.is_feasible(1, game.hold_plans())
    log = IterationLog()
    state = initialize(game, log=log)
    assert [(e.phase, e.player, e.improved) for e in log.entries] == [("init", 1, True)]
    assert log.iterations == 0
    for i in game.ids:
        assert game.is_feasible(i, state.plans)


@pytest.mark.parametrize("kw", [dict(eps=0), dict(order="sideways"), dict(max_iters=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        GameConfig(**kw)


@pytest.mark.parametrize("seed", range(6))
def test_best_response_matches_rules_one_step(seed):
    params, states, plan_j, world = random_pair_instance(seed, T=1)
    game = Game(params, states, world)
    br = game.best_response(1, {2: plan_j}, seed_current=False)
    expect, _ = rule_based_best_response(1, 2, params, states, plan_j, world)
    if math.isinf(expect):
        assert not br.ok
    else:
        assert br.cost == pytest.approx(expect, abs=1e-6)


def test_rules_toggle_reaches_compiler():
    world = WorldParams(L=2, T=2, tau=1.0, d_bar=50.0, d_hat=20.0)
    params = {1: vehicle(1, 20.0, 1)}
    states = {1: VehicleState(0.0, 20.0, 1)}
    game = Game(params, states, world, config=GameConfig(rules=RuleSet(lateral=False)))
    assert "lane_freeze" not in game.compile(1, game.hold_plans()).row_blocks
    assert isinstance(game.state_of(game.hold_plans()), GameState)
