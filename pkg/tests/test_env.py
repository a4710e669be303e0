import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavrelay.aoi import AoiTable
from uavrelay.config import ScenarioConfig
from uavrelay.env import (ConstraintFlags, GraphError, InfeasibleActionError, UavRelayEnv, WaypointGraph,
                          WorldState, check_constraints, make_env, reference_efficiency, reward_from_flags)


def line_graph(devices=(0, 40, 60), spacing=200.0):
    n = len(devices)
    pos = [[i * spacing, 0.0] for i in range(n)]
    nb = [[q for q in (p - 1, p + 1) if 0 <= q < n] for p in range(n)]
    return WaypointGraph(pos, nb, devices)


def cube_graph():
    # 3-regular graph on 8 waypoints
    pos = [[x * 200.0, y * 200.0 + z * 50.0] for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    nb = [[q for q in range(8) if bin(p ^ q).count("1") == 1] for p in range(8)]
    return WaypointGraph(pos, nb, [0, 10, 10, 10, 20, 20, 20, 10])


CFG = ScenarioConfig().replace(n_waypoints=8, horizon=40)


def test_random_graph_properties():
    g = WaypointGraph.random(ScenarioConfig(), [3, 0])
    assert g.n == 14 and g.base == 0 and g.devices[0] == 0 and g.devices.sum() == 100
    assert np.all(g.adjacency == g.adjacency.T)
    assert g.is_connected()
    for p, nb in enumerate(g.neighbors):
        assert all(g.distances[p, q] <= 300.0 for q in nb)
    g2 = WaypointGraph.random(ScenarioConfig(), [3, 0])
    np.testing.assert_array_equal(g.positions, g2.positions)
    assert WaypointGraph.from_dict(g.to_dict()).neighbors == g.neighbors


def test_graph_validation():
    with pytest.raises(GraphError):
        WaypointGraph([[0, 0], [1, 0]], [[1], []], [0, 1])
    with pytest.raises(GraphError):
        WaypointGraph([[0, 0], [1, 0], [5, 5]], [[1], [0], []], [0, 1, 1])
    with pytest.raises(GraphError):
        WaypointGraph([[0, 0], [1, 0]], [[1], [0]], [0, -1])


def test_action_count_bound_degree_three():
    env = UavRelayEnv(CFG, cube_graph())
    assert env.n_actions == 4 ** 3
    env.reset(0)
    assert len(env.enumerate_actions()) <= 64


def test_reset_contract():
    env = make_env(ScenarioConfig(), 0)
    s = env.reset([0, 1, 0])
    assert s.t == 0 and np.all(s.aoi.ages == 0)
    assert len(set(s.positions.tolist())) == 3
    assert np.all((s.heights >= 140) & (s.heights <= 250))
    assert env.action_mask()[0]  # all hover is always allowed


def test_no_colocation_off_base_and_territories():
    env = UavRelayEnv(ScenarioConfig().replace(n_uavs=2, n_waypoints=3), line_graph())
    env.reset(0)
    env.state.positions = np.array([1, 2])
    env.state.visited[:] = False
    env.state.visited[0, 1] = env.state.visited[1, 2] = True
    env.state.visited[:, 0] = True
    for a, dest in env.enumerate_actions():
        assert dest[0] != dest[1] or dest[0] == 0
        assert dest[0] != 2 and dest[1] != 1


def test_infeasible_action_rejected():
    env = UavRelayEnv(ScenarioConfig().replace(n_uavs=2, n_waypoints=3), line_graph())
    env.reset(0)
    bad = np.flatnonzero(~env.action_mask())
    with pytest.raises(InfeasibleActionError):
        env.step(int(bad[0]) if bad.size else env.n_actions)


def test_transition_pure_and_deterministic():
    env = make_env(CFG, 1)
    env.reset([1, 1, 0])
    before = env.state.snapshot()
    draws = env.draw_channels()
    a = int(np.flatnonzero(env.action_mask())[-1])
    s1, i1 = env.transition(env.state, a, draws)
    s2, i2 = env.transition(env.state, a, draws)
    assert env.state.snapshot() == before
    assert s1.snapshot() == s2.snapshot() and i1.reward == i2.reward


def test_same_seed_same_trajectory():
    def run():
        env = make_env(CFG, 2)
        env.reset([2, 1, 5])
        rng = np.random.default_rng(0)
        snaps = []
        done = False
        while not done:
            s, _, done, _ = env.step(int(rng.choice(np.flatnonzero(env.action_mask()))))
            snaps.append(s.snapshot())
        return snaps
    assert run() == run()


def single_uav_env(**kw):
    cfg = ScenarioConfig().replace(n_uavs=1, n_waypoints=3, **kw)
    env = UavRelayEnv(cfg, line_graph())
    env.reset(0)
    env.state.positions = np.array([0])
    env.state.heights = np.array([150.0])
    env._build_link_tables(env.state.heights)
    return env


def test_uplink_only_on_arrival_and_delivery_near_base():
    env = single_uav_env()
    draws = np.zeros((1, 3))  # every link LoS
    _, hover = env.transition(env.state, 0, draws)
    assert hover.uplink.sum() == 0 and hover.mobility_energy[0] == pytest.approx(env.hover_energy)
    s, r, done, info = env.apply(env.action_of([1]), draws)
    assert info.served_devices[0] == 40 and info.uplink[0] > 0
    # waypoint 1 is 200 m from the BS, so the data goes straight down the backhaul
    assert info.delivered == 1 and s.aoi.age(1) == 0 and s.aoi.age(2) == 1


def test_encoding_shape_and_bounds():
    env = make_env(ScenarioConfig(), 0)
    env.reset([0, 1, 0])
    x = env.encode_state()
    assert x.shape == (2 * 3 + 4,) and np.all((0 <= x) & (x <= 1))
    env.state.eta_sum = 5.0
    env.state.t = 1
    assert env.encode_state()[-2] == 1.0


def make_state(positions, visited, eta=0.5, aoi=0.1, t=1):
    s = WorldState(t=t, positions=np.array(positions), heights=np.full(len(positions), 150.0),
                   visited=np.array(visited, dtype=bool),
                   pending=np.full((len(positions), 3), -1), aoi=AoiTable(3), aoi_norm=aoi)
    s.eta_sum = eta * t
    return s


def test_reward_examples():
    g = line_graph()
    ok = make_state([1, 2], [[1, 1, 0], [1, 0, 1]], eta=0.4)
    flags = check_constraints(ok, g, 0.3, 0.7)
    assert flags.all_hold and reward_from_flags(flags, 0.4, 1.0) == 0.4
    together = make_state([1, 1], [[1, 1, 0], [1, 1, 0]])
    assert reward_from_flags(check_constraints(together, g, 0.3, 0.7), 0.4, 1.0) == -1.0
    stale = make_state([1, 2], [[1, 1, 0], [1, 0, 1]], aoi=0.9)
    assert reward_from_flags(check_constraints(stale, g, 0.3, 0.7), 0.4, 1.0) == 0.0
    slow = make_state([1, 2], [[1, 1, 0], [1, 0, 1]], eta=0.1)
    assert reward_from_flags(check_constraints(slow, g, 0.3, 0.7), 0.4, 1.0) == -1.0


def test_coverage_judged_at_end_only():
    s = make_state([0], [[1, 1, 0]])
    g = line_graph()
    assert check_constraints(s, g, 0.3, 0.7).coverage
    final = check_constraints(s, g, 0.3, 0.7, final=True)
    assert not final.coverage and final.coverage_progress == pytest.approx(2 / 3)


def test_reference_efficiency_positive_and_overridable():
    assert reference_efficiency(ScenarioConfig()) > 0
    assert reference_efficiency(ScenarioConfig().replace(eta_reference=7.0)) == 7.0


@given(st.lists(st.booleans(), min_size=4, max_size=4), st.floats(0, 1))
def test_reward_case_table(flags, eta):
    f = ConstraintFlags(*flags)
    r = reward_from_flags(f, eta, 1.0)
    if not (f.trajectory and f.coverage and f.efficiency):
        assert r == -1.0
    elif not f.freshness:
        assert r == 0.0
    else:
        assert r == eta


@given(st.integers(0, 50), st.integers(0, 10))
def test_random_rollouts_keep_invariants(seed, ep):
    env = make_env(CFG.replace(horizon=15), seed % 5)
    env.reset([seed, 1, ep])
    rng = np.random.default_rng(seed)
    done = False
    while not done:
        mask = env.action_mask()
        s, r, done, info = env.step(int(rng.choice(np.flatnonzero(mask))))
        off = s.positions[s.positions != env.graph.base]
        assert len(set(off.tolist())) == len(off)
        assert info.flags.trajectory
        assert 0 <= s.eta <= 1 and s.aoi_norm >= 0
        assert r in (-1.0, 0.0) or r == pytest.approx(info.eta_step)
