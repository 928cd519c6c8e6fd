import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_scenario, square
from ffcrowd.presets import table1
from ffcrowd.scenario import (BLOCK_AREA_EPS, Obstacle, ScenarioError, ScenarioSyntaxError, build_grid, parse_scenario,
                              scenario_to_dict, serialize_scenario, spawn_positions)

MINIMAL = {
    "world": {"width": 30, "height": 30},
    "goals": [{"id": "g1", "x": 27, "y": 27}],
    "groups": [{"count": 1, "spawn": {"x": 1, "y": 1, "w": 2, "h": 2}, "goal": "g1"}],
    "ff": {"stop_frame": 600, "target_frame": 1000},
}


def doc(**changes):
    d = json.loads(json.dumps(MINIMAL))
    d.update(changes)
    return d


def test_minimal_file_gives_15_by_15_grid():
    s = parse_scenario(json.dumps(MINIMAL))
    g = build_grid(s)
    assert (g.cols, g.rows) == (15, 15)
    assert s.n_agents == 1 and s.cell_size == 2.0


def test_unknown_goal_is_semantic_error():
    d = doc(groups=[{"count": 1, "spawn": {"x": 1, "y": 1, "w": 2, "h": 2}, "goal": "g9"}])
    with pytest.raises(ScenarioError, match="unknown goal"):
        parse_scenario(json.dumps(d))


def test_syntax_error_reports_line():
    text = '{\n  "world": {"width": 30,\n  "height": }\n}'
    with pytest.raises(ScenarioSyntaxError) as info:
        parse_scenario(text)
    assert info.value.line == 3


@pytest.mark.parametrize("field,value,needle", [
    ("ff", {"stop_frame": 1000, "target_frame": 600}, "target_frame"),
    ("world", {"width": -1, "height": 30}, "positive"),
    ("goals", [{"id": "g1", "x": 40, "y": 27}], "outside"),
])
def test_invariant_violations_are_named(field, value, needle):
    with pytest.raises(ScenarioError, match=needle):
        parse_scenario(json.dumps(doc(**{field: value})))


def test_ocean_out_of_range_rejected():
    d = doc()
    d["groups"][0]["ocean"] = {"o": 0.5, "c": 0.5, "e": 1.2, "a": 0.5, "n": 0.5}
    with pytest.raises(ScenarioError, match="OCEAN E"):
        parse_scenario(json.dumps(d))


def test_self_intersecting_obstacle_rejected():
    d = doc(obstacles=[{"polygon": [[5, 5], [8, 8], [8, 5], [5, 8]]}])
    with pytest.raises(ScenarioError, match="not simple"):
        parse_scenario(json.dumps(d))


def test_table1_agent_counts():
    # four simulations with 1, 5, 10 and 20 agents
    assert [table1(i).n_agents for i in range(1, 5)] == [1, 5, 10, 20]


def test_round_trip_is_identity():
    s = table1(4, obstacles=True)
    again = parse_scenario(serialize_scenario(s))
    assert again == s
    assert serialize_scenario(again) == serialize_scenario(s)
    assert scenario_to_dict(again) == scenario_to_dict(s)


def test_open_grid_has_no_blocked_cells():
    g = build_grid(make_scenario())
    assert g.n_blocked == 0


def _overlap_oracle(x0, y0, x1, y1, cols, rows, cs):
    # cell blocked iff the rectangles overlap with positive area (beyond float noise)
    out = np.zeros((rows, cols), dtype=bool)
    for r in range(rows):
        for c in range(cols):
            ox = min(x1, (c + 1) * cs) - max(x0, c * cs)
            oy = min(y1, (r + 1) * cs) - max(y0, r * cs)
            out[r, c] = ox > 0 and oy > 0 and ox * oy > BLOCK_AREA_EPS
    return out


def test_centered_4m_square_blocks_overlapping_cells():
    s = make_scenario(obstacles=[square(15.0, 15.0, 4.0)])
    g = build_grid(s)
    expected = _overlap_oracle(13, 13, 17, 17, 15, 15, 2.0)
    assert np.array_equal(g.blocked, expected)
    assert 4 <= g.n_blocked <= 9


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 20), st.floats(0.5, 20), st.floats(0.3, 8), st.floats(0.3, 8))
def test_rectangle_blocking_matches_overlap_oracle(x, y, w, h):
    ob = Obstacle(((x, y), (x + w, y), (x + w, y + h), (x, y + h)))
    s = make_scenario(obstacles=[ob], spawn=(28.5, 28.5, 1.0, 1.0), goal=(29.5, 29.5))
    g = build_grid(s)
    assert np.array_equal(g.blocked, _overlap_oracle(x, y, x + w, y + h, 15, 15, 2.0))


def test_obstacle_covering_world_blocks_everything():
    s = make_scenario(obstacles=[Obstacle(((0, 0), (30, 0), (30, 30), (0, 30)))], goal=(30.0, 30.0))
    assert build_grid(s).blocked.all()


def test_spawn_positions_inside_region_and_free():
    s = table1(4, obstacles=True)
    grid = build_grid(s)
    pts = spawn_positions(s, grid, np.random.default_rng(3))
    assert len(pts) == 20
    for gid, p in pts:
        sp = s.groups[gid].spawn
        assert sp.x <= p[0] <= sp.x + sp.w and sp.y <= p[1] <= sp.y + sp.h
        assert not grid.is_blocked(*grid.cell_of(*p))


def test_unknown_ffa_parameter_rejected():
    with pytest.raises(ScenarioError, match="unknown ffa parameter"):
        parse_scenario(json.dumps(doc(ffa={"lambda": 3})))


def test_ffa_block_overrides_defaults():
    s = parse_scenario(json.dumps(doc(ffa={"weibull_scale": 6.0})))
    assert s.ffa.weibull_scale == 6.0
    assert parse_scenario(serialize_scenario(s)) == s
