"""Frame-by-frame BioCrowds simulation.

Space is sampled by static markers; each frame an agent owns the markers that
are closer to it than to any other agent within reach, and moves along the
goal-weighted mean of the vectors to its markers.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
import shapely
from scipy.spatial import cKDTree

from .pathplan import Path, plan_path
from .personality import apply_features, profile_groups
from .scenario import Grid, Scenario, build_grid, obstacle_union, spawn_positions

DEFAULT_MAX_SPEED = 1.5
DEFAULT_PERSONAL_RADIUS = 1.0
WAYPOINT_RADIUS = 0.5
ARRIVAL_EPS = 0.5
DEFAULT_FRAME_LIMIT = 50_000
# stall handling: an agent that covers less than STALL_FRACTION of its free-walking
# distance over STALL_WINDOW frames steers DETOUR_ANGLE to the right for DETOUR_FRAMES
STALL_WINDOW = 50
STALL_FRACTION = 0.2
DETOUR_FRAMES = 50
DETOUR_ANGLE = math.radians(60.0)

TRAJECTORY_COLUMNS = ("frame", "agent_id", "x", "y", "speed", "state")


class AgentState(str, Enum):
    ACTIVE = "active"
    SUSPENDED = "suspended"
    ARRIVED = "arrived"


@dataclass(eq=False)
class Agent:
    id: int
    group_id: int
    goal_id: str
    goal: np.ndarray
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    max_speed: float = DEFAULT_MAX_SPEED
    personal_radius: float = DEFAULT_PERSONAL_RADIUS
    path: Path | None = None
    state: AgentState = AgentState.ACTIVE
    stall_anchor: tuple[int, np.ndarray] | None = None
    detour_until: int = -1

    @property
    def speed(self) -> float:
        return float(math.hypot(*self.velocity))

    @property
    def next_waypoint(self) -> np.ndarray:
        if self.path is None:
            return self.goal
        wp = self.path.waypoints
        return wp[1] if len(wp) > 1 else wp[0]

    def distance_to_goal(self) -> float:
        return float(math.hypot(*(self.position - self.goal)))


@dataclass(eq=False)
class MarkerField:
    markers: np.ndarray
    owner: np.ndarray
    tree: cKDTree | None = None

    def __post_init__(self):
        if self.tree is None and len(self.markers):
            self.tree = cKDTree(self.markers)

    def __len__(self) -> int:
        return len(self.markers)


@dataclass(eq=False)
class SimState:
    scenario: Scenario
    grid: Grid
    agents: list[Agent]
    markers: MarkerField
    rng: np.random.Generator
    frame: int = 0
    trajectory: list[tuple] = field(default_factory=list)
    profiles: dict = field(default_factory=dict)
    obstacles: object = None
    steps: int = 0
    marker_assignments: Counter = field(default_factory=Counter)
    motion_evaluations: Counter = field(default_factory=Counter)

    @property
    def frame_dt(self) -> float:
        return self.scenario.frame_dt

    def agent(self, agent_id: int) -> Agent:
        return self.agents[agent_id]

    def active_agents(self) -> list[Agent]:
        return [a for a in self.agents if a.state is AgentState.ACTIVE]

    def all_arrived(self) -> bool:
        return all(a.state is AgentState.ARRIVED for a in self.agents)

    def positions(self) -> dict[int, np.ndarray]:
        return {a.id: a.position.copy() for a in self.agents}


def _jittered(n: int, x0: float, y0: float, w: float, h: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` points, each uniform inside its own stratum of an ``nx`` by ``ny`` split."""
    if n == 0:
        return np.zeros((0, 2))
    nx = max(int(round(math.sqrt(n * w / h))), 1)
    ny = int(math.ceil(n / nx))
    strata = np.arange(nx * ny)
    if nx * ny > n:
        strata = np.sort(rng.choice(strata, size=n, replace=False))
    u = rng.random((n, 2))
    return np.column_stack([x0 + (strata % nx + u[:, 0]) * (w / nx), y0 + (strata // nx + u[:, 1]) * (h / ny)])


def scatter_markers(grid: Grid, density: float, rng: np.random.Generator, obstacles=None) -> MarkerField:
    """Markers in every unblocked cell, ``round(density * area)`` per cell.

    Positions are uniform within a stratified split of the cell, which keeps
    the expected density uniform while ruling out large empty patches that
    would leave an agent with no marker ahead of it.
    """
    chunks = []
    for r in range(grid.rows):
        for c in range(grid.cols):
            if grid.blocked[r, c]:
                continue
            x0, y0, x1, y1 = grid.cell_bounds(c, r)
            n = int(round(density * (x1 - x0) * (y1 - y0)))
            chunks.append(_jittered(n, x0, y0, x1 - x0, y1 - y0, rng))
    markers = np.concatenate(chunks) if chunks else np.zeros((0, 2))
    if obstacles is not None and len(markers):
        markers = markers[~shapely.contains_xy(obstacles, markers[:, 0], markers[:, 1])]
    return MarkerField(markers, np.full(len(markers), -1, dtype=int))


def init_state(scenario: Scenario, seed: int | None = None, personality: bool = True) -> SimState:
    """Spawn agents, profile groups, scatter markers and plan every path."""
    seed = scenario.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    grid = build_grid(scenario)
    obstacles = obstacle_union(scenario)
    agents = []
    for aid, (gid, pos) in enumerate(spawn_positions(scenario, grid, rng)):
        grp = scenario.groups[gid]
        goal = scenario.goal(grp.goal_id)
        agents.append(Agent(aid, gid, goal.id, np.array([goal.x, goal.y]), pos))
    state = SimState(scenario, grid, agents, MarkerField(np.zeros((0, 2)), np.zeros(0, dtype=int)), rng,
                     obstacles=obstacles)
    if personality:
        state.profiles = profile_groups(scenario, agents, rng)
        apply_features(state)
    state.markers = scatter_markers(grid, scenario.marker_density, rng, obstacles)
    for a in agents:
        a.path = plan_path(grid, a.position, a.goal)
        if a.distance_to_goal() < ARRIVAL_EPS:
            a.state = AgentState.ARRIVED
    return state


def assign_markers(state: SimState) -> np.ndarray:
    """Give each marker to the nearest active agent whose radius reaches it.

    Ties go to the lower agent id. Returns (and stores) the owner array,
    -1 for free markers.
    """
    field_ = state.markers
    owner = np.full(len(field_), -1, dtype=int)
    active = state.active_agents()
    if not active or field_.tree is None:
        field_.owner = owner
        return owner
    pos = np.array([a.position for a in active])
    radii = np.array([a.personal_radius for a in active])
    hits = field_.tree.query_ball_point(pos, radii)
    m_idx = np.fromiter((m for lst in hits for m in lst), dtype=int)
    if m_idx.size:
        a_idx = np.repeat(np.arange(len(active)), [len(lst) for lst in hits])
        ids = np.array([a.id for a in active])[a_idx]
        diff = field_.markers[m_idx] - pos[a_idx]
        dist = np.hypot(diff[:, 0], diff[:, 1])
        order = np.lexsort((ids, dist, m_idx))
        m_sorted = m_idx[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = m_sorted[1:] != m_sorted[:-1]
        owner[m_sorted[first]] = ids[order][first]
    field_.owner = owner
    return owner


def _heading(agent: Agent, turn: float) -> np.ndarray:
    g = agent.next_waypoint - agent.position
    if turn:
        c, s = math.cos(turn), math.sin(turn)
        g = np.array([c * g[0] - s * g[1], s * g[0] + c * g[1]])
    return g


def motion_vector(agent: Agent, owned_markers: np.ndarray, frame_dt: float, turn: float = 0.0) -> np.ndarray:
    """Velocity (m/s) from the agent's markers, weighted by alignment with its next waypoint.

    ``turn`` rotates the reference direction (radians, counter-clockwise).
    """
    if len(owned_markers) == 0:
        return np.zeros(2)
    x = agent.position
    g = _heading(agent, turn)
    gn = math.hypot(*g)
    if gn == 0.0:
        return np.zeros(2)
    d = owned_markers - x
    dn = np.hypot(d[:, 0], d[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(dn > 0, (d @ g) / (dn * gn), 0.0)
    f = np.maximum(cos, 0.0)
    total = f.sum()
    if total <= 0.0:
        return np.zeros(2)
    m = (f[:, None] * d).sum(axis=0) / total
    mn = math.hypot(*m)
    if mn == 0.0:
        return np.zeros(2)
    return m * (min(agent.max_speed, mn / frame_dt) / mn)


def yield_vector(agent: Agent, owned_markers: np.ndarray, frame_dt: float, turn: float = 0.0) -> np.ndarray:
    """Fallback for an agent with no marker ahead: BioCrowds' full weighting.

    Weights are (1 + cos) / (1 + distance) over every owned marker, so a
    blocked agent drifts sideways or back into free space instead of standing
    still forever.
    """
    if len(owned_markers) == 0:
        return np.zeros(2)
    x = agent.position
    g = _heading(agent, turn)
    gn = math.hypot(*g)
    d = owned_markers - x
    dn = np.hypot(d[:, 0], d[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where((dn > 0) & (gn > 0), (d @ g) / (dn * gn), 0.0)
    f = (1.0 + cos) / (1.0 + dn)
    total = f.sum()
    if total <= 0.0:
        return np.zeros(2)
    m = (f[:, None] * d).sum(axis=0) / total
    mn = math.hypot(*m)
    if mn == 0.0:
        return np.zeros(2)
    return m * (min(agent.max_speed, mn / frame_dt) / mn)


def motion_vectors(agents: list[Agent], owner: np.ndarray, markers: np.ndarray, frame_dt: float,
                   turns: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Velocities of ``agents`` from the marker ``owner`` array, all at once.

    Same rule as ``motion_vector`` followed by the ``yield_vector`` fallback
    for agents with no marker ahead. Also returns each agent's marker count.
    """
    n = len(agents)
    out = np.zeros((n, 2))
    if n == 0:
        return out, np.zeros(0, dtype=int)
    slot = {a.id: k for k, a in enumerate(agents)}
    lookup = np.full(max(max(slot) + 1, int(owner.max(initial=-1)) + 1), -1, dtype=int)
    lookup[list(slot)] = list(slot.values())
    taken = np.flatnonzero(owner >= 0)
    k = lookup[owner[taken]]
    keep = k >= 0
    taken, k = taken[keep], k[keep]
    counts = np.bincount(k, minlength=n)
    pos = np.array([a.position for a in agents])
    g = np.array([a.next_waypoint for a in agents]) - pos
    if turns is not None and np.any(turns):
        c, s_ = np.cos(turns), np.sin(turns)
        g = np.column_stack([c * g[:, 0] - s_ * g[:, 1], s_ * g[:, 0] + c * g[:, 1]])
    gn = np.hypot(g[:, 0], g[:, 1])
    d = markers[taken] - pos[k]
    dn = np.hypot(d[:, 0], d[:, 1])
    denom = dn * gn[k]
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0, (d[:, 0] * g[k, 0] + d[:, 1] * g[k, 1]) / denom, 0.0)
    speeds = np.array([a.max_speed for a in agents])

    def combine(w):
        total = np.bincount(k, weights=w, minlength=n)
        mx = np.bincount(k, weights=w * d[:, 0], minlength=n)
        my = np.bincount(k, weights=w * d[:, 1], minlength=n)
        with np.errstate(invalid="ignore", divide="ignore"):
            m = np.column_stack([mx, my]) / total[:, None]
        m[total <= 0] = 0.0
        mn = np.hypot(m[:, 0], m[:, 1])
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(mn > 0, np.minimum(speeds, mn / frame_dt) / mn, 0.0)
        return m * scale[:, None]

    forward = combine(np.maximum(cos, 0.0))
    forward[gn == 0] = 0.0
    stuck = ~forward.any(axis=1) & (counts > 0)
    if stuck.any():
        # a zero heading leaves the fallback cos at 0, like yield_vector
        fallback = combine((1.0 + cos) / (1.0 + dn))
        forward[stuck] = fallback[stuck]
    return forward, counts


def _passed(agent: Agent, path: Path, obstacles) -> bool:
    # already closer to the waypoint after next than the current target is,
    # with a clear line to it: the target is behind, typically inside a crowd
    x, y = float(agent.position[0]), float(agent.position[1])
    nx, ny = path.waypoints[1].tolist()
    ax, ay = path.waypoints[2].tolist()
    if math.hypot(x - ax, y - ay) >= math.hypot(nx - ax, ny - ay):
        return False
    if obstacles is None:
        return True
    return not shapely.intersects(obstacles, shapely.LineString([(x, y), (ax, ay)]))


def trim_waypoints(agent: Agent, obstacles=None) -> None:
    """Drop the anchor waypoint while the next intermediate waypoint is reached or passed."""
    path = agent.path
    if path is None:
        return
    x, y = float(agent.position[0]), float(agent.position[1])
    while len(path) > 2:
        wx, wy = path.waypoints[1].tolist()
        if math.hypot(x - wx, y - wy) >= WAYPOINT_RADIUS and not _passed(agent, path, obstacles):
            break
        path = Path.from_points(path.waypoints[1:])
    agent.path = path


def _blocked_points(state: SimState, pts: np.ndarray) -> np.ndarray:
    if state.obstacles is None or not len(pts):
        return np.zeros(len(pts), dtype=bool)
    return shapely.contains_xy(state.obstacles, pts[:, 0], pts[:, 1])


def _check_stall(agent: Agent, frame: int, frame_dt: float) -> None:
    if agent.stall_anchor is None or frame < agent.stall_anchor[0]:
        agent.stall_anchor = (frame, agent.position.copy())
        return
    start, where = agent.stall_anchor
    if frame - start < STALL_WINDOW:
        return
    expected = agent.max_speed * (frame - start) * frame_dt
    if math.hypot(*(agent.position - where)) < STALL_FRACTION * expected:
        agent.detour_until = frame + DETOUR_FRAMES
    agent.stall_anchor = (frame, agent.position.copy())


def step(state: SimState) -> SimState:
    """Advance one frame."""
    dt = state.frame_dt
    active = state.active_agents()
    for a in active:
        trim_waypoints(a, state.obstacles)
    owner = assign_markers(state)
    if active:
        turns = np.array([-DETOUR_ANGLE if state.frame < a.detour_until else 0.0 for a in active])
        vel, counts = motion_vectors(active, owner, state.markers.markers, dt, turns)
        for k, a in enumerate(active):
            state.marker_assignments[a.id] += int(counts[k])
            state.motion_evaluations[a.id] += 1
            a.velocity = vel[k]
        moves = vel * dt
        old = np.array([a.position for a in active])
        new = old + moves
        bad = _blocked_points(state, new)
        scale = 1.0
        while bad.any() and scale > 1e-3:
            scale *= 0.5
            new[bad] = old[bad] + moves[bad] * scale
            bad = bad & _blocked_points(state, new)
        new[bad] = old[bad]
        for k, a in enumerate(active):
            a.velocity = (new[k] - old[k]) / dt
            a.position = new[k]
            trim_waypoints(a, state.obstacles)
            if a.distance_to_goal() < ARRIVAL_EPS:
                a.state = AgentState.ARRIVED
            else:
                _check_stall(a, state.frame + 1, dt)
    state.frame += 1
    state.steps += 1
    for a in active:
        state.trajectory.append(
            (state.frame, a.id, float(a.position[0]), float(a.position[1]), a.speed, a.state.value)
        )
    return state


@dataclass
class RunOutcome:
    status: str  # "arrived", "until" or "frame_limit"
    records: list[tuple]
    final_frame: int


def run_continuous(state: SimState, until: Callable[[SimState], bool] | None = None,
                   frame_limit: int = DEFAULT_FRAME_LIMIT,
                   on_frame: Callable[[SimState], None] | None = None) -> RunOutcome:
    """Step until ``until(state)`` holds (default: everyone arrived) or ``frame_limit`` is reached."""
    start = len(state.trajectory)
    while True:
        if until is not None and until(state):
            status = "until"
            break
        if state.all_arrived():
            status = "arrived"
            break
        if state.frame >= frame_limit:
            status = "frame_limit"
            break
        step(state)
        if on_frame is not None:
            on_frame(state)
    return RunOutcome(status, state.trajectory[start:], state.frame)
