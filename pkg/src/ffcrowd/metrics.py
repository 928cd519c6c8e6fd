"""Position-error measures between continuous and fast-forwarded runs, and run statistics."""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping

import numpy as np

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("sim_id", "repeat", "time_s", "avg_speed", "avg_ang_var", "avg_dist",
                  "time_ffa_s", "avg_error_m", "mean_dif")


# displacements below this count as "did not move" (float noise, not motion)
STATIONARY_EPS = 1e-9


class MismatchedAgents(ValueError):
    pass


class DegenerateDenominator(ZeroDivisionError):
    def __init__(self, agent_id=None):
        super().__init__(f"agent {agent_id} did not move between the stop and target frames")
        self.agent_id = agent_id


def _dist(p, q) -> float:
    return float(math.hypot(p[0] - q[0], p[1] - q[1]))


def avg_error(bc_positions: Mapping, ffa_positions: Mapping) -> float:
    """Mean Euclidean distance between matching agents of two position sets."""
    if set(bc_positions) != set(ffa_positions):
        raise MismatchedAgents("position sets cover different agents")
    if not bc_positions:
        raise MismatchedAgents("no agents to compare")
    return sum(_dist(bc_positions[a], ffa_positions[a]) for a in bc_positions) / len(bc_positions)


def relative_dif(bc_t, bc_target, ffa_target, agent_id=None) -> float:
    """Fast-forward displacement error relative to the distance the continuous agent travelled."""
    denom = _dist(bc_t, bc_target)
    if denom <= STATIONARY_EPS:
        raise DegenerateDenominator(agent_id)
    return _dist(bc_target, ffa_target) / denom


def mean_dif(bc_t: Mapping, bc_target: Mapping, ffa_target: Mapping) -> tuple[float, list]:
    """Mean relative error over agents, skipping agents that did not move.

    Returns ``(mean, excluded_ids)``; the mean is NaN when every agent is excluded.
    """
    if not (set(bc_t) == set(bc_target) == set(ffa_target)):
        raise MismatchedAgents("position sets cover different agents")
    values, excluded = [], []
    for a in sorted(bc_t):
        try:
            values.append(relative_dif(bc_t[a], bc_target[a], ffa_target[a], a))
        except DegenerateDenominator:
            excluded.append(a)
    if excluded:
        log.info("excluded %d stationary agent(s) from the relative error: %s", len(excluded), excluded)
    return (float(np.mean(values)) if values else float("nan")), excluded


@dataclass(frozen=True)
class RunStats:
    total_time: float
    avg_speed: float
    avg_ang_var: float
    avg_dist: float | None
    frames_simulated: int


def simulation_stats(trajectory: list[tuple], groups: Mapping[int, int], frame_dt: float,
                     final_frame: int | None = None, frames_simulated: int | None = None) -> RunStats:
    """Run statistics from trajectory records ``(frame, agent_id, x, y, speed, state)``.

    ``groups`` maps agent id to group id. Heading changes are taken between
    consecutive frames of the same agent; pairwise distances only within a
    group, and ``avg_dist`` is None when no frame has a same-group pair.
    """
    if not trajectory:
        raise ValueError("empty trajectory")
    final = max(r[0] for r in trajectory) if final_frame is None else final_frame
    speeds = [r[4] for r in trajectory if r[4] > 1e-12]
    avg_speed = float(np.mean(speeds)) if speeds else 0.0

    by_agent: dict[int, list[tuple]] = defaultdict(list)
    by_frame: dict[int, list[tuple]] = defaultdict(list)
    for r in trajectory:
        by_agent[r[1]].append(r)
        by_frame[r[0]].append(r)

    turns = []
    for recs in by_agent.values():
        recs.sort(key=lambda r: r[0])
        prev_heading = None
        prev = None
        for r in recs:
            heading = None
            if prev is not None and r[0] == prev[0] + 1:
                dx, dy = r[2] - prev[2], r[3] - prev[3]
                if dx or dy:
                    heading = math.degrees(math.atan2(dy, dx))
            if heading is not None and prev_heading is not None:
                turns.append(abs((heading - prev_heading + 180.0) % 360.0 - 180.0))
            prev_heading = heading
            prev = r
    avg_ang = float(np.mean(turns)) if turns else 0.0

    frame_means = []
    for recs in by_frame.values():
        members: dict[int, list] = defaultdict(list)
        for r in recs:
            members[groups[r[1]]].append((r[2], r[3]))
        dists = []
        for pts in members.values():
            if len(pts) < 2:
                continue
            p = np.asarray(pts)
            diff = p[:, None, :] - p[None, :, :]
            d = np.hypot(diff[..., 0], diff[..., 1])
            iu = np.triu_indices(len(p), 1)
            dists.extend(d[iu])
        if dists:
            frame_means.append(float(np.mean(dists)))
    avg_dist = float(np.mean(frame_means)) if frame_means else None
    n_frames = len(by_frame) if frames_simulated is None else frames_simulated
    return RunStats(final * frame_dt, avg_speed, avg_ang, avg_dist, n_frames)
