"""Fog of war: hidden agents are suspended and re-materialized from path estimates.

Every simulation cell is split into ``s * s`` fog cells. Agents standing in a
hidden fog cell stop being simulated; for each fog cell on the remaining path
they leave a callback with the estimated entry and exit frames. A callback
fires when its cell becomes visible during that frame span, placing the agent
back on its path.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import ARRIVAL_EPS, AgentState, SimState, run_continuous, step
from .ffa import JumpRequest, _place, estimate
from .pathplan import Path, point_at_distance
from .scenario import Grid, VisionSpec

FOG_EVENT_COLUMNS = ("frame", "agent_id", "event", "x", "y", "fog_cell")


@dataclass(eq=False)
class FogGrid:
    subdivision: int
    cols: int
    rows: int
    cell_size: float
    visible: np.ndarray  # (rows, cols) bool

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        c = min(max(int(math.floor(x / self.cell_size)), 0), self.cols - 1)
        r = min(max(int(math.floor(y / self.cell_size)), 0), self.rows - 1)
        return c, r

    def index(self, cell: tuple[int, int]) -> int:
        return cell[1] * self.cols + cell[0]

    def is_visible(self, cell: tuple[int, int]) -> bool:
        return bool(self.visible[cell[1], cell[0]])

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = (np.arange(self.cols) + 0.5) * self.cell_size
        ys = (np.arange(self.rows) + 0.5) * self.cell_size
        return np.meshgrid(xs, ys)


@dataclass
class VisionSource:
    kind: str  # "tower" or "dynamic"
    shape: str  # "circle" or "rect"
    params: tuple[float, ...]
    active: bool = True

    @classmethod
    def from_spec(cls, spec: VisionSpec) -> "VisionSource":
        return cls(spec.kind, spec.shape, tuple(spec.params), spec.active)

    @classmethod
    def circle(cls, x: float, y: float, r: float, kind: str = "tower") -> "VisionSource":
        if r <= 0:
            raise ValueError("radius must be positive")
        return cls(kind, "circle", (x, y, r))

    @classmethod
    def rect(cls, x: float, y: float, w: float, h: float, kind: str = "tower") -> "VisionSource":
        if w <= 0 or h <= 0:
            raise ValueError("rectangle must be non-degenerate")
        return cls(kind, "rect", (x, y, w, h))

    def contains(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        if self.shape == "circle":
            cx, cy, r = self.params
            return (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
        x, y, w, h = self.params
        return (xs >= x) & (xs <= x + w) & (ys >= y) & (ys <= y + h)


@dataclass
class Callback:
    agent_id: int
    fog_cell: tuple[int, int]
    enter_frame: int
    leave_frame: int
    enter_pos: np.ndarray
    leave_pos: np.ndarray
    enter_arc: float
    leave_arc: float
    path: Path = field(repr=False)
    active: bool = True

    def covers(self, frame: int) -> bool:
        return self.enter_frame <= frame <= self.leave_frame

    def position_at(self, frame: int) -> np.ndarray:
        """Point on the path between the entry and exit estimates, by frame fraction."""
        span = self.leave_frame - self.enter_frame
        frac = 0.0 if span == 0 else min(max((frame - self.enter_frame) / span, 0.0), 1.0)
        if frac == 0.0:
            return self.enter_pos.copy()
        return point_at_distance(self.path, self.enter_arc + frac * (self.leave_arc - self.enter_arc))

    def arc_at(self, frame: int) -> float:
        span = self.leave_frame - self.enter_frame
        frac = 0.0 if span == 0 else min(max((frame - self.enter_frame) / span, 0.0), 1.0)
        return self.enter_arc + frac * (self.leave_arc - self.enter_arc)


def build_fog(grid: Grid, s: int = 2) -> FogGrid:
    if s < 1:
        raise ValueError("subdivision must be >= 1")
    return FogGrid(s, grid.cols * s, grid.rows * s, grid.cell_size / s,
                   np.zeros((grid.rows * s, grid.cols * s), dtype=bool))


def update_visibility(fog: FogGrid, sources) -> FogGrid:
    """A fog cell is visible iff its center lies inside an active source."""
    xs, ys = fog.centers()
    vis = np.zeros_like(fog.visible)
    for src in sources:
        if src.active:
            vis |= src.contains(xs, ys)
    fog.visible = vis
    return fog


def path_crossings(path: Path, fog: FogGrid) -> list[tuple[tuple[int, int], float, float]]:
    """Maximal runs of the polyline inside one fog cell: (cell, arc in, arc out)."""
    wp = path.waypoints
    if len(wp) == 1:
        return [(fog.cell_of(*wp[0]), 0.0, 0.0)]
    cs = fog.cell_size
    runs: list[list] = []
    for i in range(len(wp) - 1):
        a, b = wp[i], wp[i + 1]
        seg = path.cumulative[i + 1] - path.cumulative[i]
        ts = {0.0, 1.0}
        for k in (0, 1):
            lo, hi = sorted((a[k], b[k]))
            if hi > lo:
                for line in range(int(math.floor(lo / cs)) + 1, int(math.ceil(hi / cs))):
                    ts.add((line * cs - a[k]) / (b[k] - a[k]))
        ts = sorted(t for t in ts if 0.0 <= t <= 1.0)
        for t0, t1 in zip(ts, ts[1:]):
            if t1 - t0 <= 1e-12:
                continue
            mid = a + 0.5 * (t0 + t1) * (b - a)
            cell = fog.cell_of(*mid)
            s0 = path.cumulative[i] + t0 * seg
            s1 = path.cumulative[i] + t1 * seg
            if runs and runs[-1][0] == cell:
                runs[-1][2] = s1
            else:
                runs.append([cell, s0, s1])
    return [(c, float(s0), float(s1)) for c, s0, s1 in runs]


def register_callbacks(agent_id: int, path: Path, speed_estimate: float, current_frame: int,
                       fog: FogGrid, frame_dt: float) -> list[Callback]:
    """One callback per fog-cell visit along ``path``, timed at ``speed_estimate`` m/s."""
    if speed_estimate <= 0:
        raise ValueError("speed estimate must be positive")
    per_frame = speed_estimate * frame_dt
    out = []
    for cell, s0, s1 in path_crossings(path, fog):
        f0 = current_frame + s0 / per_frame
        f1 = current_frame + s1 / per_frame
        out.append(Callback(
            agent_id, cell,
            int(math.floor(f0 + 1e-9)), int(math.ceil(f1 - 1e-9)),
            point_at_distance(path, s0), point_at_distance(path, s1), s0, s1, path,
        ))
    return out


@dataclass
class _Suspension:
    callbacks: list[Callback]
    path: Path
    final_arc: float


class FogController:
    """Suspension state machine between a stop frame and a target frame."""

    def __init__(self, state: SimState, fog: FogGrid, sources, request: JumpRequest):
        self.state = state
        self.fog = fog
        self.sources = list(sources)
        self.request = request
        self.suspended: dict[int, _Suspension] = {}
        self.events: list[tuple] = []
        self.history: dict[int, list[Callback]] = {}

    def _log(self, agent, event: str) -> None:
        cell = self.fog.index(self.fog.cell_of(*agent.position))
        self.events.append((self.state.frame, agent.id, event,
                            float(agent.position[0]), float(agent.position[1]), cell))

    def _suspend(self, agent) -> None:
        st = self.state
        present = [a for a in st.agents if a.state is not AgentState.ARRIVED]
        remaining = max(self.request.target_frame - st.frame, 0)
        _, ip, mag, path = estimate(agent, present, remaining, st)
        speed = ip * (agent.speed or agent.max_speed)
        callbacks = register_callbacks(agent.id, path, speed, st.frame, self.fog, st.frame_dt) if speed > 0 else []
        self.suspended[agent.id] = _Suspension(callbacks, path, min(mag, path.length))
        self.history.setdefault(agent.id, []).extend(callbacks)
        agent.state = AgentState.SUSPENDED
        self._log(agent, "suspend")

    def _activate(self, agent, cb: Callback) -> None:
        sus = self.suspended.pop(agent.id)
        for other in sus.callbacks:
            other.active = False
        arc = cb.arc_at(self.state.frame)
        agent.position = point_at_distance(sus.path, arc)
        agent.path = sus.path.suffix(arc)
        agent.velocity = np.zeros(2)
        agent.state = AgentState.ACTIVE
        self._log(agent, "activate")
        if agent.distance_to_goal() < ARRIVAL_EPS:
            agent.state = AgentState.ARRIVED

    def _hidden(self, agent) -> bool:
        return not self.fog.is_visible(self.fog.cell_of(*agent.position))

    def begin(self) -> None:
        update_visibility(self.fog, self.sources)
        for a in self.state.agents:
            if a.state is AgentState.ACTIVE and self._hidden(a):
                self._suspend(a)

    def after_step(self) -> None:
        st = self.state
        update_visibility(self.fog, self.sources)
        for aid in sorted(self.suspended):
            sus = self.suspended[aid]
            for cb in sus.callbacks:
                if cb.active and cb.covers(st.frame) and self.fog.is_visible(cb.fog_cell):
                    self._activate(st.agents[aid], cb)
                    break
        for a in st.agents:
            if a.state is AgentState.ACTIVE and a.id not in self.suspended and self._hidden(a):
                self._suspend(a)

    def finalize(self) -> None:
        """Place every still-suspended agent at its final estimated position."""
        st = self.state
        clearance = 2.0 * st.scenario.ffa.body_radius
        placed: list[np.ndarray] = []
        for aid in sorted(self.suspended):
            sus = self.suspended[aid]
            a = st.agents[aid]
            arc = sus.final_arc
            if arc < sus.path.length:
                arc = _place(sus.path, arc, placed, clearance)
            a.position = point_at_distance(sus.path, arc)
            a.path = sus.path.suffix(arc)
            a.state = AgentState.ACTIVE
            self._log(a, "finalize")
            if a.distance_to_goal() < ARRIVAL_EPS:
                a.state = AgentState.ARRIVED
            else:
                placed.append(a.position)
        self.suspended.clear()


def fog_step(state: SimState, controller: FogController) -> SimState:
    """One frame under fog: simulate visible agents, then update suspensions."""
    step(state)
    controller.after_step()
    return state


@dataclass
class FogRun:
    events: list[tuple]
    callbacks: dict[int, list[Callback]]
    final_positions: dict[int, np.ndarray]


def run_fog(state: SimState, request: JumpRequest, sources, subdivision: int = 2) -> FogRun:
    """Simulate to the stop frame, then run fogged frames up to the target frame."""
    run_continuous(state, until=lambda s: s.frame >= request.stop_frame)
    fog = build_fog(state.grid, subdivision)
    ctl = FogController(state, fog, sources, request)
    ctl.begin()
    while state.frame < request.target_frame:
        fog_step(state, ctl)
    ctl.finalize()
    return FogRun(ctl.events, ctl.history, state.positions())


def write_fog_events_csv(path, events) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(FOG_EVENT_COLUMNS)
        w.writerows(events)
