import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bare_state, make_scenario, square
from ffcrowd.engine import (AgentState, SimState, assign_markers, init_state, motion_vector, motion_vectors,
                            run_continuous, scatter_markers, step, trim_waypoints, yield_vector)
from ffcrowd.pathplan import Path
from ffcrowd.presets import table1
from ffcrowd.scenario import Obstacle, build_grid


# -- markers ---------------------------------------------------------------

def test_twenty_markers_per_free_cell():
    s = make_scenario(obstacles=[square(15.0, 15.0, 4.0)])
    grid = build_grid(s)
    field_ = scatter_markers(grid, 5.0, np.random.default_rng(0))
    assert len(field_) == 20 * (grid.cols * grid.rows - grid.n_blocked)
    cells = [grid.cell_of(*m) for m in field_.markers]
    assert not any(grid.is_blocked(*c) for c in cells)


def test_fully_blocked_grid_has_no_markers():
    s = make_scenario(obstacles=[Obstacle(((0, 0), (30, 0), (30, 30), (0, 30)))], goal=(30.0, 30.0))
    assert len(scatter_markers(build_grid(s), 5.0, np.random.default_rng(0))) == 0


def test_marker_scatter_deterministic():
    grid = build_grid(make_scenario())
    a = scatter_markers(grid, 5.0, np.random.default_rng(7)).markers
    b = scatter_markers(grid, 5.0, np.random.default_rng(7)).markers
    assert np.array_equal(a, b)


def test_single_agent_owns_close_marker_not_far_one():
    s = make_scenario()
    st_ = bare_state(s, [(10.0, 10.0)], markers=[(10.5, 10.0), (11.5, 10.0)])
    owner = assign_markers(st_)
    assert owner.tolist() == [0, -1]


def test_equidistant_marker_goes_to_lower_id():
    s = make_scenario()
    pos = [(0.0, 0.0)] * 8
    pos[2] = (9.0, 10.0)
    pos[7] = (11.0, 10.0)
    st_ = bare_state(s, pos, markers=[(10.0, 10.0)])
    for a in st_.agents:
        if a.id not in (2, 7):
            a.state = AgentState.ARRIVED
    assert assign_markers(st_).tolist() == [2]


def _ownership_oracle(agents, markers):
    out = []
    for m in markers:
        best = None
        for a in sorted(agents, key=lambda a: a.id):
            d = math.dist(m, a.position)
            if d <= a.personal_radius and (best is None or d < best[0]):
                best = (d, a.id)
        out.append(-1 if best is None else best[1])
    return out


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000))
def test_assignment_matches_brute_force(n_agents, seed):
    rng = np.random.default_rng(seed)
    s = make_scenario()
    st_ = bare_state(s, rng.uniform(5, 10, (n_agents, 2)), markers=rng.uniform(4, 11, (150, 2)))
    for a in st_.agents:
        a.personal_radius = float(rng.uniform(0.5, 2.0))
    assert assign_markers(st_).tolist() == _ownership_oracle(st_.agents, st_.markers.markers)


# -- motion ----------------------------------------------------------------

def _agent_at(pos, waypoint):
    s = make_scenario()
    st_ = bare_state(s, [pos])
    a = st_.agents[0]
    a.path = Path.from_points([pos, waypoint])
    return a


def test_single_marker_ahead_clamps_to_max_speed():
    a = _agent_at((10.0, 10.0), (20.0, 10.0))
    v = motion_vector(a, np.array([[10.5, 10.0]]), 0.02)
    assert np.allclose(v, (1.5, 0.0))


def test_symmetric_markers_head_straight_for_waypoint():
    a = _agent_at((10.0, 10.0), (20.0, 10.0))
    v = motion_vector(a, np.array([[10.3, 10.4], [10.3, 9.6], [10.2, 10.1], [10.2, 9.9]]), 0.02)
    assert v[1] == pytest.approx(0.0, abs=1e-12) and v[0] > 0


def test_markers_behind_give_zero():
    a = _agent_at((10.0, 10.0), (20.0, 10.0))
    assert not motion_vector(a, np.array([[9.5, 10.0], [9.7, 10.6]]), 0.02).any()


def test_small_offset_moves_exactly_there():
    a = _agent_at((10.0, 10.0), (20.0, 10.0))
    v = motion_vector(a, np.array([[10.01, 10.0]]), 0.02)
    assert np.allclose(v * 0.02, (0.01, 0.0))


def test_yield_moves_toward_free_space():
    a = _agent_at((10.0, 10.0), (20.0, 10.0))
    v = yield_vector(a, np.array([[10.0, 10.8], [9.8, 10.8]]), 0.02)
    assert v[1] > 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_vectorized_motion_matches_reference(seed):
    rng = np.random.default_rng(seed)
    s = make_scenario()
    n = int(rng.integers(1, 10))
    st_ = bare_state(s, rng.uniform(5, 10, (n, 2)), markers=rng.uniform(4, 11, (200, 2)))
    for a in st_.agents:
        a.path = Path.from_points([a.position, rng.uniform(0, 30, 2)])
    owner = assign_markers(st_)
    turns = rng.choice([0.0, -1.0], n)
    v, counts = motion_vectors(st_.agents, owner, st_.markers.markers, 0.02, turns)
    for k, a in enumerate(st_.agents):
        mine = st_.markers.markers[owner == a.id]
        ref = motion_vector(a, mine, 0.02, turns[k])
        if not ref.any() and len(mine):
            ref = yield_vector(a, mine, 0.02, turns[k])
        assert np.allclose(v[k], ref, atol=1e-12)
        assert counts[k] == len(mine)


# -- stepping --------------------------------------------------------------

def test_agent_next_to_goal_arrives():
    s = make_scenario()
    st_ = bare_state(s, [(26.99, 27.0)])
    st_.agents[0].path = Path.from_points([(26.99, 27.0), (27.0, 27.0)])
    step(st_)
    assert st_.agents[0].state is AgentState.ARRIVED and st_.frame == 1


def test_empty_agent_list_just_advances_frame():
    st_ = bare_state(make_scenario(), [])
    step(st_)
    assert st_.frame == 1 and st_.trajectory == []


def test_until_already_true_returns_immediately():
    st_ = init_state(make_scenario(), seed=0)
    out = run_continuous(st_, until=lambda s: s.frame >= 0)
    assert out.status == "until" and out.records == [] and st_.frame == 0


def test_straight_12m_run_arrives_in_400_to_500_frames():
    s = make_scenario(width=16.0, height=4.0, spawn=(1.99, 1.99, 0.02, 0.02), goal=(14.0, 2.0))
    st_ = init_state(s, seed=0)
    d0 = st_.agents[0].distance_to_goal()
    out = run_continuous(st_)
    assert out.status == "arrived"
    # lower bound from the speed cap (minus the 0.5 m arrival radius), upper bound loose
    assert (d0 - 0.5) / (1.5 * 0.02) <= out.final_frame <= 500


def test_frame_limit_reported_distinctly():
    st_ = init_state(make_scenario(), seed=0)
    out = run_continuous(st_, frame_limit=10)
    assert out.status == "frame_limit" and st_.frame == 10


def test_contesting_agents_are_slower_than_solo():
    def mean_speed(positions, goals):
        s = make_scenario()
        st_ = bare_state(s, positions, goals=goals)
        st_.markers = scatter_markers(st_.grid, 5.0, np.random.default_rng(1))
        for a in st_.agents:
            a.path = Path.from_points([a.position, a.goal])
        run_continuous(st_, frame_limit=150)
        return np.mean([r[4] for r in st_.trajectory])

    solo = mean_speed([(10.0, 15.0)], [(20.0, 15.0)])
    pair = mean_speed([(10.0, 15.0), (12.0, 15.0)], [(20.0, 15.0), (2.0, 15.0)])
    assert pair < solo


def _run(name="table1_obs_sim4", seed=3, frames=700):
    st_ = init_state(table1(4, obstacles=True) if name == "table1_obs_sim4" else table1(2), seed=seed)
    run_continuous(st_, frame_limit=frames)
    return st_


def test_speed_cap_and_non_penetration():
    st_ = _run()
    by_agent = {}
    for f, aid, x, y, speed, _ in st_.trajectory:
        by_agent.setdefault(aid, []).append((f, x, y, speed))
    obstacles = shapely.union_all([o.shape() for o in st_.scenario.obstacles])
    xs = np.array([r[2] for r in st_.trajectory])
    ys = np.array([r[3] for r in st_.trajectory])
    assert not shapely.contains_xy(obstacles, xs, ys).any()
    for aid, recs in by_agent.items():
        cap = st_.agents[aid].max_speed
        for (f0, x0, y0, _), (f1, x1, y1, sp) in zip(recs, recs[1:]):
            if f1 == f0 + 1:
                assert math.hypot(x1 - x0, y1 - y0) / 0.02 <= cap + 1e-9
            assert sp <= cap + 1e-9


def test_marker_ownership_is_exclusive_every_frame():
    st_ = init_state(table1(4), seed=1)
    for _ in range(200):
        owner = assign_markers(st_)
        for k in np.flatnonzero(owner >= 0):
            a = st_.agents[owner[k]]
            assert a.state is AgentState.ACTIVE
            assert math.dist(st_.markers.markers[k], a.position) <= a.personal_radius + 1e-12
        step(st_)


def test_single_agent_progress_is_monotone():
    st_ = init_state(table1(1), seed=4)
    run_continuous(st_)
    goal = st_.agents[0].goal
    d = [math.dist((r[2], r[3]), goal) for r in st_.trajectory]
    assert all(b <= a + 1e-9 for a, b in zip(d[1:], d[2:]))


def test_determinism_bit_identical():
    a, b = _run(seed=5, frames=400), _run(seed=5, frames=400)
    assert a.trajectory == b.trajectory


def test_passed_waypoint_is_dropped():
    s = make_scenario()
    st_ = bare_state(s, [(4.6, 3.0)])
    a = st_.agents[0]
    a.path = Path.from_points([(1.0, 1.0), (3.0, 3.0), (5.0, 5.0), (7.0, 5.0)])
    trim_waypoints(a)
    # (3,3) is behind: the agent is already nearer (5,5) than (3,3) is
    assert np.allclose(a.next_waypoint, (5.0, 5.0))


def test_passed_waypoint_kept_without_line_of_sight():
    s = make_scenario(obstacles=[square(4.8, 4.0, 0.6)])
    st_ = bare_state(s, [(4.6, 3.0)])
    st_.obstacles = shapely.union_all([o.shape() for o in s.obstacles])
    a = st_.agents[0]
    a.path = Path.from_points([(1.0, 1.0), (3.0, 3.0), (5.0, 5.0)])
    a.path = Path.from_points([(1.0, 1.0), (3.0, 3.0), (5.0, 5.0), (7.0, 5.0)])
    trim_waypoints(a, st_.obstacles)
    assert np.allclose(a.next_waypoint, (3.0, 3.0))


def test_head_on_pair_resolves():
    # two agents walking straight at each other along one line
    s = make_scenario()
    st_ = bare_state(s, [(8.0, 15.0), (22.0, 15.0)], goals=[(26.0, 15.0), (4.0, 15.0)])
    st_.markers = scatter_markers(st_.grid, 5.0, np.random.default_rng(2))
    for a in st_.agents:
        a.path = Path.from_points([a.position, a.goal])
    out = run_continuous(st_, frame_limit=3000)
    assert out.status == "arrived"


def test_stall_triggers_detour():
    s = make_scenario()
    st_ = bare_state(s, [(10.0, 10.0)])
    a = st_.agents[0]
    a.path = Path.from_points([a.position, a.goal])
    # no markers at all: the agent cannot move
    run_continuous(st_, frame_limit=60)
    assert a.detour_until > st_.frame - 10


def test_state_copy_fields():
    # SimState keeps instrumentation counters per agent
    st_ = init_state(table1(2), seed=0)
    run_continuous(st_, frame_limit=5)
    assert isinstance(st_, SimState)
    assert all(st_.motion_evaluations[a.id] == 5 for a in st_.agents)
