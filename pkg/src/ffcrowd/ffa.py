"""Fast forward: jump agents from a stop frame to a target frame along their planned paths.

Each agent's straight-line dead-reckoned displacement, shrunk by a crowd
interaction multiplier, becomes a travel distance that is laid out along the
agent's remaining global path.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .engine import ARRIVAL_EPS, Agent, AgentState, SimState
from .pathplan import Path, point_at_distance
from .scenario import IP_RADIUS, WEIBULL_SCALE, WEIBULL_SHAPE

SLIDE_STEP = 0.1

JUMP_COLUMNS = ("agent_id", "x_t", "y_t", "pdr_x", "pdr_y", "ip", "magnitude", "x_proj", "y_proj")


class MissingPath(RuntimeError):
    pass


@dataclass(frozen=True)
class JumpRequest:
    stop_frame: int
    target_frame: int

    def __post_init__(self):
        if self.target_frame < self.stop_frame:
            raise ValueError("target frame precedes stop frame")

    @property
    def frames(self) -> int:
        return self.target_frame - self.stop_frame


@dataclass(frozen=True)
class JumpRecord:
    agent_id: int
    pos_t: np.ndarray
    pdr_estimate: np.ndarray
    ip_multiplier: float
    magnitude: float
    pos_projected: np.ndarray
    arc_length: float
    path: Path  # polyline the projection was taken on

    def row(self) -> tuple:
        return (self.agent_id, *map(float, self.pos_t), *map(float, self.pdr_estimate),
                self.ip_multiplier, self.magnitude, *map(float, self.pos_projected))


def pdr_estimate(agent: Agent, frames: int, frame_dt: float) -> np.ndarray:
    """Dead-reckoned position ``frames`` ahead, heading straight for the final goal."""
    to_goal = agent.goal - agent.position
    dist = math.hypot(*to_goal)
    if frames == 0 or dist == 0.0:
        return agent.position.copy()
    speed = agent.speed or agent.max_speed
    return agent.position + to_goal / dist * (speed * frames * frame_dt)


def weibull_survival(x: float, shape: float, scale: float) -> float:
    return math.exp(-((x / scale) ** shape))


def ip_factor(agent: Agent, others: Iterable[Agent], radius: float = IP_RADIUS,
              shape: float = WEIBULL_SHAPE, scale: float = WEIBULL_SCALE) -> float:
    """Crowd multiplier in (0, 1]: Weibull survival of the neighbour count within ``radius``."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    count = sum(
        1 for o in others
        if o.id != agent.id and math.hypot(*(o.position - agent.position)) <= radius
    )
    return weibull_survival(count, shape, scale)


def jump_magnitude(pos_t, pdr_pos, ip: float) -> float:
    if not 0.0 < ip <= 1.0:
        raise ValueError("ip multiplier must be in (0, 1]")
    return ip * float(math.hypot(*(np.asarray(pdr_pos) - np.asarray(pos_t))))


def estimate(agent: Agent, present: list[Agent], frames: int, state: SimState) -> tuple[np.ndarray, float, float, Path]:
    """(pdr position, ip multiplier, magnitude, polyline from the agent's position)."""
    if agent.path is None:
        raise MissingPath(f"agent {agent.id} has no path")
    p = state.scenario.ffa
    pdr = pdr_estimate(agent, frames, state.frame_dt)
    ip = ip_factor(agent, present, p.ip_radius, p.weibull_shape, p.weibull_scale)
    return pdr, ip, jump_magnitude(agent.position, pdr, ip), agent.path.rebase(agent.position)


def _place(path: Path, arc: float, occupied: list[np.ndarray], clearance: float) -> float:
    """Arc length at or behind ``arc`` whose point keeps ``clearance`` from ``occupied``."""

    def free(d: float) -> bool:
        q = point_at_distance(path, d)
        return all(math.hypot(*(q - o)) >= clearance for o in occupied)

    if not occupied or free(arc):
        return arc
    d = arc
    while d > 0.0:
        d = max(d - SLIDE_STEP, 0.0)
        if free(d):
            return d
    # nothing behind; look ahead before giving up
    d = arc
    while d < path.length:
        d = min(d + SLIDE_STEP, path.length)
        if free(d):
            return d
    return arc


def fast_forward(state: SimState, request: JumpRequest) -> list[JumpRecord]:
    """Reposition every active agent at the target frame without simulating the gap.

    Agents are handled in ascending id order; one that would land within two
    body radii of an already repositioned agent slides back along its path in
    0.1 m steps. Mutates ``state`` and returns one record per jumped agent.
    """
    if state.frame != request.stop_frame:
        raise ValueError(f"state is at frame {state.frame}, not the stop frame {request.stop_frame}")
    active = sorted(state.active_agents(), key=lambda a: a.id)
    missing = [a.id for a in active if a.path is None]
    if missing:
        raise MissingPath(f"agents without a path: {missing}")
    present = [a for a in state.agents if a.state is not AgentState.ARRIVED]
    clearance = 2.0 * state.scenario.ffa.body_radius
    # estimates use the stop-frame snapshot for every agent
    plans = [(a, *estimate(a, present, request.frames, state)) for a in active]
    records = []
    placed: list[np.ndarray] = []
    for a, pdr, ip, mag, path in plans:
        pos_t = a.position.copy()
        if request.frames == 0:
            records.append(JumpRecord(a.id, pos_t, pdr, ip, mag, pos_t.copy(), 0.0, path))
            placed.append(pos_t)
            continue
        if mag >= path.length:
            arc = path.length
        else:
            arc = _place(path, mag, placed, clearance)
        q = point_at_distance(path, arc)
        a.position = q
        a.path = path.suffix(arc)
        if a.distance_to_goal() < ARRIVAL_EPS:
            a.state = AgentState.ARRIVED
            a.velocity = np.zeros(2)
        else:
            placed.append(q)
        records.append(JumpRecord(a.id, pos_t, pdr, ip, mag, q.copy(), arc, path))
    state.frame = request.target_frame
    return records


def write_jumps_csv(path, records: list[JumpRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(JUMP_COLUMNS)
        for r in records:
            w.writerow(r.row())
