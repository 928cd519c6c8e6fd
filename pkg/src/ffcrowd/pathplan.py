"""A* global planning over the free-cell graph and arc-length path utilities."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .scenario import Grid

ON_PATH_TOL = 1e-6
PROJECT_TIE_EPS = 1e-9
_SQRT2 = math.sqrt(2.0)


class PlanningError(RuntimeError):
    pass


class NoPath(PlanningError):
    pass


class BlockedEndpoint(PlanningError):
    pass


class OffPath(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Path:
    """Polyline with prefix arc lengths. ``waypoints`` is an (n, 2) float array."""

    waypoints: np.ndarray
    cumulative: np.ndarray
    grid_cost: float = 0.0

    @classmethod
    def from_points(cls, points, grid_cost: float = 0.0) -> "Path":
        pts = [np.asarray(p, dtype=float) for p in points]
        kept = [pts[0]]
        for p in pts[1:]:
            if np.hypot(*(p - kept[-1])) > 1e-12:
                kept.append(p)
        wp = np.array(kept, dtype=float).reshape(-1, 2)
        seg = np.hypot(*np.diff(wp, axis=0).T) if len(wp) > 1 else np.zeros(0)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        wp.setflags(write=False)
        cum.setflags(write=False)
        return cls(wp, cum, grid_cost)

    @property
    def length(self) -> float:
        return float(self.cumulative[-1])

    @property
    def start(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def end(self) -> np.ndarray:
        return self.waypoints[-1]

    def __len__(self) -> int:
        return len(self.waypoints)

    def point_at(self, d: float) -> np.ndarray:
        return point_at_distance(self, d)

    def suffix(self, d: float) -> "Path":
        """Remaining path from arc length ``d`` onward."""
        q = point_at_distance(self, d)
        if d >= self.length:
            return Path.from_points([self.end])
        keep = self.waypoints[self.cumulative > d]
        return Path.from_points([q, *keep])

    def rebase(self, position) -> "Path":
        """Replace the first waypoint by ``position`` (the agent's actual location)."""
        return Path.from_points([position, *self.waypoints[1:]])

    def project(self, q) -> tuple[float, float]:
        """Closest point on the polyline: (arc length, distance). Ties go to the lower arc length."""
        q = np.asarray(q, dtype=float)
        if len(self.waypoints) == 1:
            return 0.0, float(np.hypot(*(q - self.waypoints[0])))
        a = self.waypoints[:-1]
        b = self.waypoints[1:]
        ab = b - a
        seg_len2 = np.einsum("ij,ij->i", ab, ab)
        t = np.clip(np.einsum("ij,ij->i", q - a, ab) / seg_len2, 0.0, 1.0)
        closest = a + t[:, None] * ab
        dist = np.hypot(*(q - closest).T)
        # near-equal distances (retraced segments) count as ties
        i = int(np.flatnonzero(dist <= dist.min() + PROJECT_TIE_EPS)[0])
        return float(self.cumulative[i] + t[i] * math.sqrt(seg_len2[i])), float(dist[i])


def point_at_distance(path: Path, d: float) -> np.ndarray:
    """Point at arc length ``d`` along ``path``; clamps to the final waypoint."""
    if d < 0:
        raise ValueError("arc length must be non-negative")
    cum = path.cumulative
    if d >= cum[-1]:
        return path.waypoints[-1].copy()
    i = int(np.searchsorted(cum, d, side="right")) - 1
    if d == cum[i]:
        return path.waypoints[i].copy()
    a, b = path.waypoints[i], path.waypoints[i + 1]
    t = (d - cum[i]) / (cum[i + 1] - cum[i])
    return a + t * (b - a)


def advance_path(path: Path, new_position) -> Path:
    """Suffix of ``path`` starting at ``new_position``, which must lie on it."""
    d, dist = path.project(new_position)
    if dist > ON_PATH_TOL:
        raise OffPath(f"position is {dist:.3g} m away from the path")
    if d >= path.length:
        return Path.from_points([path.end])
    keep = path.waypoints[path.cumulative > d]
    return Path.from_points([np.asarray(new_position, dtype=float), *keep])


# --------------------------------------------------------------------------
# A*

_MOVES = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
          (1, 1, _SQRT2), (1, -1, _SQRT2), (-1, 1, _SQRT2), (-1, -1, _SQRT2)]


def neighbors(grid: Grid, col: int, row: int):
    """Free 8-neighbours with unit-cell edge costs; diagonals need both side cells free."""
    for dc, dr, w in _MOVES:
        c, r = col + dc, row + dr
        if grid.is_blocked(c, r):
            continue
        if dc and dr and (grid.is_blocked(col + dc, row) or grid.is_blocked(col, row + dr)):
            continue
        yield c, r, w


def astar(grid: Grid, start: tuple[int, int], goal: tuple[int, int]) -> tuple[list[tuple[int, int]], float]:
    """Cell sequence and cost (meters, center to center) of a shortest route."""
    if grid.is_blocked(*start) or grid.is_blocked(*goal):
        raise BlockedEndpoint("start or goal cell is blocked")
    cs = grid.cell_size
    gx, gy = goal

    def h(c: int, r: int) -> float:
        return math.hypot(c - gx, r - gy)

    g_cost = {start: 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    counter = 0
    heap = [(h(*start), 0.0, counter, start)]
    closed = set()
    while heap:
        _, g, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            cells = [cur]
            while cur in came:
                cur = came[cur]
                cells.append(cur)
            return cells[::-1], g * cs
        closed.add(cur)
        for c, r, w in neighbors(grid, *cur):
            nxt = (c, r)
            ng = g + w
            if ng < g_cost.get(nxt, math.inf) - 1e-12:
                g_cost[nxt] = ng
                came[nxt] = cur
                counter += 1
                heapq.heappush(heap, (ng + h(c, r), ng, counter, nxt))
    raise NoPath(f"no route from cell {start} to cell {goal}")


def plan_path(grid: Grid, start, goal) -> Path:
    """Shortest grid route from ``start`` to ``goal`` as a polyline.

    Interior waypoints are cell centers; the start and goal cells contribute
    the exact start and goal points instead of their centers.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    cells, cost = astar(grid, grid.cell_of(*start), grid.cell_of(*goal))
    pts = [start, *(grid.center(c, r) for c, r in cells[1:-1]), goal]
    return Path.from_points(pts, grid_cost=cost)


def path_rows(path: Path) -> list[tuple[float, float]]:
    return [(float(x), float(y)) for x, y in path.waypoints]
