import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffcrowd.pathplan import (BlockedEndpoint, NoPath, OffPath, Path, advance_path, astar, plan_path,
                              point_at_distance)
from ffcrowd.scenario import Grid

L_PATH = Path.from_points([(0, 0), (3, 0), (3, 4)])


def grid_from(blocked: np.ndarray, cs: float = 2.0) -> Grid:
    rows, cols = blocked.shape
    return Grid(cols, rows, cs, cols * cs, rows * cs, blocked)


def dijkstra_cost(blocked: np.ndarray, start, goal, cs: float = 2.0):
    """Independent oracle: networkx Dijkstra on the 8-connected free-cell graph.

    A diagonal step is allowed only when neither orthogonal side cell is blocked.
    """
    rows, cols = blocked.shape
    g = nx.Graph()
    free = lambda c, r: 0 <= c < cols and 0 <= r < rows and not blocked[r, c]
    for r in range(rows):
        for c in range(cols):
            if not free(c, r):
                continue
            g.add_node((c, r))
            for dc, dr in ((1, 0), (0, 1), (1, 1), (1, -1)):
                n = (c + dc, r + dr)
                if not free(*n):
                    continue
                if dc and dr and not (free(c + dc, r) and free(c, r + dr)):
                    continue
                g.add_edge((c, r), n, weight=math.hypot(dc, dr) * cs)
    try:
        return nx.dijkstra_path_length(g, start, goal)
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        return None


def test_astar_matches_dijkstra_on_100_random_grids():
    rng = np.random.default_rng(2024)
    checked = unreachable = 0
    for _ in range(100):
        blocked = rng.random((15, 15)) < 0.2
        free = np.argwhere(~blocked)
        (r0, c0), (r1, c1) = free[rng.choice(len(free), 2, replace=False)]
        grid = grid_from(blocked)
        oracle = dijkstra_cost(blocked, (c0, r0), (c1, r1))
        if oracle is None:
            with pytest.raises(NoPath):
                astar(grid, (c0, r0), (c1, r1))
            unreachable += 1
            continue
        cells, cost = astar(grid, (c0, r0), (c1, r1))
        assert cost == pytest.approx(oracle, abs=1e-9)
        # the returned cells realize that cost
        steps = sum(math.hypot(a[0] - b[0], a[1] - b[1]) for a, b in zip(cells, cells[1:])) * 2.0
        assert steps == pytest.approx(cost, abs=1e-9)
        checked += 1
    assert checked > 50


def test_empty_grid_opposite_corners():
    blocked = np.zeros((15, 15), dtype=bool)
    _, cost = astar(grid_from(blocked), (0, 0), (14, 14))
    assert cost == pytest.approx(dijkstra_cost(blocked, (0, 0), (14, 14)))
    assert cost == pytest.approx(14 * math.sqrt(2) * 2.0)


def test_wall_gives_no_path():
    blocked = np.zeros((15, 15), dtype=bool)
    blocked[:, 7] = True
    with pytest.raises(NoPath):
        plan_path(grid_from(blocked), (1.0, 1.0), (29.0, 1.0))


def test_blocked_endpoint():
    blocked = np.zeros((15, 15), dtype=bool)
    blocked[0, 0] = True
    with pytest.raises(BlockedEndpoint):
        plan_path(grid_from(blocked), (1.0, 1.0), (29.0, 29.0))


def test_no_corner_cutting_past_a_blocked_side():
    blocked = np.zeros((3, 3), dtype=bool)
    blocked[0, 1] = True  # (col 1, row 0)
    cells, cost = astar(grid_from(blocked), (0, 0), (1, 1))
    assert cells == [(0, 0), (0, 1), (1, 1)]
    assert cost == pytest.approx(4.0)


def test_same_cell_path_is_start_goal():
    p = plan_path(grid_from(np.zeros((15, 15), dtype=bool)), (1.2, 1.3), (1.8, 0.4))
    assert np.allclose(p.waypoints, [(1.2, 1.3), (1.8, 0.4)])


def test_plan_path_endpoints_exact():
    start, goal = (1.3, 2.7), (26.1, 27.9)
    p = plan_path(grid_from(np.zeros((15, 15), dtype=bool)), start, goal)
    assert tuple(p.start) == start and tuple(p.end) == goal


@pytest.mark.parametrize("d,expected", [(5.0, (3, 2)), (0.0, (0, 0)), (17.0, (3, 4)), (3.0, (3, 0))])
def test_point_at_distance_on_l_path(d, expected):
    assert np.allclose(point_at_distance(L_PATH, d), expected)


def test_negative_distance_rejected():
    with pytest.raises(ValueError):
        point_at_distance(L_PATH, -1.0)


def test_advance_path_examples():
    assert np.allclose(advance_path(L_PATH, point_at_distance(L_PATH, 5)).waypoints, [(3, 2), (3, 4)])
    same = advance_path(L_PATH, (0, 0))
    assert np.array_equal(same.waypoints, L_PATH.waypoints)
    at_goal = advance_path(L_PATH, (3, 4))
    assert len(at_goal) == 1 and at_goal.length == 0.0


def test_advance_path_off_path():
    with pytest.raises(OffPath):
        advance_path(L_PATH, (1.0, 1.0))


polylines = st.lists(
    st.tuples(st.floats(-50, 50, allow_nan=False), st.floats(-50, 50, allow_nan=False)),
    min_size=2, max_size=8,
).map(Path.from_points).filter(lambda p: len(p) >= 2)


@settings(max_examples=200, deadline=None)
@given(polylines, st.floats(0, 1), st.floats(0, 1))
def test_composition_identities(path, u, v):
    d1 = u * path.length
    q = point_at_distance(path, d1)
    sub = advance_path(path, q)
    # the suffix is as long as what was left, to 1e-9
    assert sub.length == pytest.approx(path.length - path.project(q)[0], abs=1e-9)
    assert np.allclose(sub.end, path.end, atol=1e-9)
    # walking d2 on the suffix lands where d1 + d2 lands on the original
    d2 = v * sub.length
    assert np.allclose(point_at_distance(sub, d2), point_at_distance(path, path.project(q)[0] + d2), atol=1e-9)
    # and the point found is on the original polyline
    assert path.project(point_at_distance(sub, d2))[1] <= 1e-9


@settings(max_examples=100, deadline=None)
@given(polylines, st.floats(0, 1))
def test_point_at_distance_lies_at_that_arc(path, u):
    d = u * path.length
    arc, dist = path.project(point_at_distance(path, d))
    assert dist <= 1e-9
    # self-overlapping polylines can project to an earlier arc, never a later one
    assert arc <= d + 1e-9


def test_suffix_and_rebase():
    s = L_PATH.suffix(4.0)
    assert np.allclose(s.waypoints, [(3, 1), (3, 4)])
    r = L_PATH.rebase((0.5, 0.5))
    assert np.allclose(r.waypoints, [(0.5, 0.5), (3, 0), (3, 4)])


def test_retraced_path_projects_to_first_pass():
    p = Path.from_points([(3.0, 0.0), (0.0, 0.125), (3.0, 0.0)])
    d = 0.8235816706142461
    arc, dist = p.project(point_at_distance(p, d))
    assert dist <= 1e-9 and arc == pytest.approx(d, abs=1e-9)
