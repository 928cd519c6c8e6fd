"""Experiment runner: continuous, fast-forward, compare and fog modes over seeded repeats.

Every mode writes UTF-8 CSVs into an output directory: per-repeat traces
(trajectories, jump records, group profiles, path polylines, fog events) plus
``report.csv`` with one row per repeat and ``summary.csv``, the same rows with
frame accounting and termination columns.
"""
from __future__ import annotations

import copy
import csv
import dataclasses
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from .engine import TRAJECTORY_COLUMNS, SimState, init_state, run_continuous
from .ffa import JumpRecord, JumpRequest, fast_forward, write_jumps_csv
from .fog import FogController, VisionSource, build_fog, fog_step, write_fog_events_csv
from .metrics import REPORT_COLUMNS, RunStats, avg_error, mean_dif, simulation_stats
from .pathplan import path_rows
from .personality import leadership
from .scenario import Scenario, ScenarioError, load_scenario

log = logging.getLogger(__name__)

MODES = ("continuous", "ffa", "compare", "fog")
DEFAULT_REPEATS = 5
FRAME_LIMIT = 50_000

ENV_WEIBULL_SHAPE = "FFCROWD_WEIBULL_SHAPE"
ENV_WEIBULL_SCALE = "FFCROWD_WEIBULL_SCALE"
ENV_FOG_SUBDIVISION = "FFCROWD_FOG_SUBDIVISION"

# --check thresholds
MAX_AVG_ERROR_M = 2.5
FOG_TOLERANCE_M = 1e-6

SUMMARY_COLUMNS = REPORT_COLUMNS + (
    "status", "final_frame", "frames_simulated", "status_ffa", "final_frame_ffa",
    "frames_simulated_ffa", "dif_excluded",
)
GROUP_COLUMNS = ("group_id", "psi", "omega", "beta", "zeta", "Psi", "leader_id")
CALLBACK_COLUMNS = ("agent_id", "fog_cell", "enter_frame", "leave_frame", "enter_x", "enter_y",
                    "leave_x", "leave_y", "active")


class ValidationError(ValueError):
    """Bad plan or scenario input (exit status 1)."""


@dataclass(frozen=True)
class ExperimentPlan:
    scenario: Scenario
    mode: str
    repeats: int = DEFAULT_REPEATS
    seed: int = 0
    out_dir: FsPath | None = None
    frame_limit: int = FRAME_LIMIT
    # False: compare and fog runs stop at the target frame instead of running to arrival
    complete: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.repeats < 1:
            raise ValidationError("repeats must be >= 1")
        if self.frame_limit < 1:
            raise ValidationError("frame_limit must be >= 1")


@dataclass
class RepeatResult:
    sim_id: str
    repeat: int
    seed: int
    stats: RunStats | None = None
    status: str = ""
    final_frame: int | None = None
    frames_simulated: int | None = None
    ffa_stats: RunStats | None = None
    status_ffa: str = ""
    final_frame_ffa: int | None = None
    frames_simulated_ffa: int | None = None
    avg_error: float | None = None
    mean_dif: float | None = None
    dif_excluded: list[int] = field(default_factory=list)
    jumps: list[JumpRecord] = field(default_factory=list)
    fog_events: list[tuple] = field(default_factory=list)
    callbacks: list[tuple] = field(default_factory=list)
    positions_bc: dict | None = None
    positions_ffa: dict | None = None

    def report_row(self) -> tuple:
        s = self.stats or self.ffa_stats
        time_s = self.stats.total_time if self.stats is not None else None
        time_ffa = self.ffa_stats.total_time if self.ffa_stats is not None else None
        return (self.sim_id, self.repeat, time_s,
                s.avg_speed if s else None, s.avg_ang_var if s else None, s.avg_dist if s else None,
                time_ffa, self.avg_error, self.mean_dif)

    def summary_row(self) -> tuple:
        return self.report_row() + (
            self.status, self.final_frame, self.frames_simulated, self.status_ffa,
            self.final_frame_ffa, self.frames_simulated_ffa, " ".join(map(str, self.dif_excluded)),
        )


# --------------------------------------------------------------------------
# configuration


def _env_number(env, name: str, cast):
    raw = env.get(name)
    if raw is None or raw == "":
        return None
    try:
        return cast(raw)
    except ValueError as exc:
        raise ValidationError(f"{name}={raw!r} is not a valid number") from exc


def apply_env_overrides(scenario: Scenario, env=None) -> Scenario:
    """Weibull shape/scale and fog subdivision from the environment, when set."""
    env = os.environ if env is None else env
    shape = _env_number(env, ENV_WEIBULL_SHAPE, float)
    scale = _env_number(env, ENV_WEIBULL_SCALE, float)
    sub = _env_number(env, ENV_FOG_SUBDIVISION, int)
    ffa = scenario.ffa
    if shape is not None:
        ffa = dataclasses.replace(ffa, weibull_shape=shape)
    if scale is not None:
        ffa = dataclasses.replace(ffa, weibull_scale=scale)
    fog = scenario.fog
    if sub is not None:
        fog = dataclasses.replace(fog, subdivision=sub)
    out = dataclasses.replace(scenario, ffa=ffa, fog=fog)
    try:
        return out.validate()
    except ScenarioError as exc:
        raise ValidationError(str(exc)) from exc


def resolve_scenario(ref) -> Scenario:
    """A Scenario, a scenario file path, or the name of a built-in preset."""
    if isinstance(ref, Scenario):
        return ref
    p = FsPath(ref)
    if p.is_file():
        return load_scenario(p)
    from .presets import presets

    named = presets()
    if str(ref) in named:
        return named[str(ref)]
    raise ValidationError(f"no scenario file or preset named {ref!r}")


# --------------------------------------------------------------------------
# state handling


def fork(state: SimState) -> SimState:
    """Independent copy of a simulation sharing the immutable world data."""
    shared = (state.scenario, state.grid, state.obstacles, state.markers.markers, state.markers.tree)
    memo = {id(obj): obj for obj in shared if obj is not None}
    return copy.deepcopy(state, memo)


def _to_frame(state: SimState, frame: int, frame_limit: int) -> str:
    out = run_continuous(state, until=lambda s: s.frame >= frame, frame_limit=frame_limit)
    return out.status


def _finish(state: SimState, frame_limit: int, complete: bool = True) -> str:
    if not complete:
        return "arrived" if state.all_arrived() else "until"
    return run_continuous(state, frame_limit=frame_limit).status


def _groups(state: SimState) -> dict[int, int]:
    return {a.id: a.group_id for a in state.agents}


def _stats(state: SimState) -> RunStats | None:
    if not state.trajectory:
        return None
    return simulation_stats(state.trajectory, _groups(state), state.frame_dt, state.frame, state.steps)


def _request(s: Scenario) -> JumpRequest:
    return JumpRequest(s.stop_frame, s.target_frame)


# --------------------------------------------------------------------------
# modes


def run_continuous_repeat(scenario: Scenario, seed: int, frame_limit: int = FRAME_LIMIT):
    state = init_state(scenario, seed=seed)
    status = _finish(state, frame_limit)
    return state, status


def run_ffa_repeat(scenario: Scenario, seed: int, frame_limit: int = FRAME_LIMIT):
    """Simulate to the stop frame, jump to the target frame, simulate to the end."""
    state = init_state(scenario, seed=seed)
    req = _request(scenario)
    status = _to_frame(state, req.stop_frame, frame_limit)
    jumps: list[JumpRecord] = []
    if state.frame == req.stop_frame:
        jumps = fast_forward(state, req)
        status = _finish(state, frame_limit)
    return state, status, jumps


def _repeat_outputs(scenario: Scenario, plan: ExperimentPlan, r: int) -> RepeatResult:
    seed = plan.seed + r
    res = RepeatResult(scenario.name or "scenario", r, seed)
    req = _request(scenario)
    limit = plan.frame_limit

    if plan.mode == "continuous":
        st, res.status = run_continuous_repeat(scenario, seed, limit)
        res.stats, res.final_frame, res.frames_simulated = _stats(st), st.frame, st.steps
        _write_traces(plan, res, bc=st)
        return res

    if plan.mode == "ffa":
        st, res.status_ffa, res.jumps = run_ffa_repeat(scenario, seed, limit)
        res.ffa_stats, res.final_frame_ffa, res.frames_simulated_ffa = _stats(st), st.frame, st.steps
        _write_traces(plan, res, ffa=st)
        return res

    base = init_state(scenario, seed=seed)
    _to_frame(base, req.stop_frame, limit)
    reached = base.frame == req.stop_frame
    bc = base
    other = fork(base)
    at_stop = base.positions()

    if plan.mode == "compare":
        ffa = other
        if reached:
            res.jumps = fast_forward(ffa, req)
            _to_frame(bc, req.target_frame, limit)
            res.positions_bc, res.positions_ffa = bc.positions(), ffa.positions()
            if bc.frame == req.target_frame:
                res.avg_error = avg_error(res.positions_bc, res.positions_ffa)
                res.mean_dif, res.dif_excluded = mean_dif(at_stop, res.positions_bc, res.positions_ffa)
        res.status = _finish(bc, limit, plan.complete)
        res.status_ffa = _finish(ffa, limit, plan.complete)
        res.stats, res.final_frame, res.frames_simulated = _stats(bc), bc.frame, bc.steps
        res.ffa_stats, res.final_frame_ffa, res.frames_simulated_ffa = _stats(ffa), ffa.frame, ffa.steps
        _write_traces(plan, res, bc=bc, ffa=ffa)
        return res

    # fog: fogged branch against a plain fast-forward of the same stop-frame state
    fogged, jumped = bc, other
    if reached:
        res.jumps = fast_forward(jumped, req)
        sources = [VisionSource.from_spec(v) for v in scenario.fog.sources]
        ctl = FogController(fogged, build_fog(fogged.grid, scenario.fog.subdivision), sources, req)
        ctl.begin()
        while fogged.frame < req.target_frame:
            fog_step(fogged, ctl)
        ctl.finalize()
        res.fog_events = ctl.events
        res.callbacks = [
            (cb.agent_id, ctl.fog.index(cb.fog_cell), cb.enter_frame, cb.leave_frame,
             float(cb.enter_pos[0]), float(cb.enter_pos[1]), float(cb.leave_pos[0]),
             float(cb.leave_pos[1]), cb.active)
            for cbs in ctl.history.values() for cb in cbs
        ]
        res.positions_bc, res.positions_ffa = fogged.positions(), jumped.positions()
        res.avg_error = avg_error(res.positions_bc, res.positions_ffa)
        res.mean_dif, res.dif_excluded = mean_dif(at_stop, res.positions_bc, res.positions_ffa)
    res.status = _finish(fogged, limit, plan.complete)
    res.status_ffa = _finish(jumped, limit, plan.complete)
    res.stats, res.final_frame, res.frames_simulated = _stats(fogged), fogged.frame, fogged.steps
    res.ffa_stats, res.final_frame_ffa, res.frames_simulated_ffa = _stats(jumped), jumped.frame, jumped.steps
    _write_traces(plan, res, bc=fogged, ffa=jumped)
    return res


def run(plan: ExperimentPlan, env=None) -> list[RepeatResult]:
    """Run every repeat of ``plan``; write CSVs when the plan has an output directory."""
    scenario = apply_env_overrides(plan.scenario, env)
    if plan.out_dir is not None:
        os.makedirs(plan.out_dir, exist_ok=True)
    results = []
    for r in range(plan.repeats):
        results.append(_repeat_outputs(scenario, plan, r))
        log.info("%s repeat %d done", scenario.name, r)
    if plan.out_dir is not None:
        write_report(FsPath(plan.out_dir), results)
    return results


# --------------------------------------------------------------------------
# checks


def reached_target(res: RepeatResult, s: Scenario) -> bool:
    """Whether the fast-forward branch actually jumped (it ran past the stop frame)."""
    return bool(res.jumps) and res.final_frame_ffa is not None and res.final_frame_ffa >= s.target_frame


def check(plan: ExperimentPlan, results: list[RepeatResult]) -> list[str]:
    """Threshold failures for ``--check``; an empty list means pass."""
    s = plan.scenario
    dt = s.target_frame - s.stop_frame
    failures = []
    for res in results:
        tag = f"{res.sim_id} repeat {res.repeat}"
        if plan.complete and plan.mode in ("continuous", "compare", "fog") and res.status != "arrived":
            failures.append(f"{tag}: run ended with status {res.status}")
        if plan.mode in ("ffa", "compare") and res.final_frame_ffa is not None:
            if plan.complete and res.status_ffa != "arrived":
                failures.append(f"{tag}: fast-forward run ended with status {res.status_ffa}")
            if reached_target(res, s) and res.frames_simulated_ffa != res.final_frame_ffa - dt:
                failures.append(f"{tag}: fast-forward simulated {res.frames_simulated_ffa} frames, "
                                f"expected {res.final_frame_ffa - dt}")
        if plan.mode in ("compare", "fog") and res.avg_error is None:
            failures.append(f"{tag}: no error measurement (run ended before the target frame)")
        if plan.mode == "fog" and not s.fog.sources and res.avg_error is not None \
                and res.avg_error > FOG_TOLERANCE_M:
            failures.append(f"{tag}: fogged positions differ from fast forward by {res.avg_error:.3g} m")
    if plan.mode == "compare":
        errs = [r.avg_error for r in results if r.avg_error is not None]
        if errs and float(np.mean(errs)) > MAX_AVG_ERROR_M:
            failures.append(f"{s.name}: mean error {np.mean(errs):.3f} m exceeds {MAX_AVG_ERROR_M} m")
    return failures


# --------------------------------------------------------------------------
# output


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _write_rows(path: FsPath, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_report(out_dir: FsPath, results: list[RepeatResult], append: bool = False) -> None:
    mode = "a" if append else "w"
    for name, header, rows in (
        ("report.csv", REPORT_COLUMNS, [r.report_row() for r in results]),
        ("summary.csv", SUMMARY_COLUMNS, [r.summary_row() for r in results]),
    ):
        path = out_dir / name
        fresh = not (append and path.exists())
        with open(path, mode, newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            if fresh:
                w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])


def write_trajectory_csv(path, trajectory) -> None:
    _write_rows(FsPath(path), TRAJECTORY_COLUMNS, trajectory)


def group_rows(state: SimState) -> list[tuple]:
    rows = []
    for gid, prof in sorted(state.profiles.items()):
        if prof is None:
            continue
        ocean = state.scenario.groups[gid].ocean
        rows.append((gid, prof.walking_speed, leadership(ocean), prof.impatience, prof.cohesion,
                     prof.desired_speed, prof.leader))
    return rows


def write_paths(out_dir: FsPath, state: SimState) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for a in state.agents:
        if a.path is not None:
            _write_rows(out_dir / f"agent_{a.id}.csv", ("x", "y"), path_rows(a.path))


def _write_traces(plan: ExperimentPlan, res: RepeatResult, bc: SimState | None = None,
                  ffa: SimState | None = None) -> None:
    if plan.out_dir is None:
        return
    base = FsPath(plan.out_dir) / f"{res.sim_id}_r{res.repeat}"
    primary = bc if bc is not None else ffa
    # planned paths as they stood at spawn
    spawn = init_state(primary.scenario, seed=res.seed)
    write_paths(FsPath(f"{base}_paths"), spawn)
    rows = group_rows(primary)
    if rows:
        _write_rows(FsPath(f"{base}_groups.csv"), GROUP_COLUMNS, rows)
    if bc is not None:
        suffix = "_fog" if plan.mode == "fog" else ""
        write_trajectory_csv(f"{base}{suffix}_trajectory.csv", bc.trajectory)
    if ffa is not None:
        write_trajectory_csv(f"{base}_ffa_trajectory.csv", ffa.trajectory)
    if res.jumps:
        write_jumps_csv(f"{base}_jumps.csv", res.jumps)
    if plan.mode == "fog":
        write_fog_events_csv(f"{base}_fog_events.csv", res.fog_events)
        _write_rows(FsPath(f"{base}_callbacks.csv"), CALLBACK_COLUMNS, res.callbacks)


# --------------------------------------------------------------------------
# suites


SUITE_MODES = {"table1": "compare", "table4": "continuous", "compare": "compare", "fog": "fog"}
# the comparison suite only measures positions at the target frame
SUITE_COMPLETE = {"table1": True, "table4": True, "compare": False, "fog": True}


def run_suite(name: str, repeats: int = DEFAULT_REPEATS, seed: int = 0, out_dir=None,
              env=None) -> dict[str, list[RepeatResult]]:
    """Run a built-in suite; results keyed by scenario name."""
    from .presets import suites

    all_suites = suites()
    if name not in all_suites:
        raise ValidationError(f"unknown suite {name!r}; expected one of {', '.join(all_suites)}")
    out = {}
    for scen in all_suites[name]:
        plan = ExperimentPlan(scen, SUITE_MODES[name], repeats, seed,
                              FsPath(out_dir) / scen.name if out_dir is not None else None,
                              complete=SUITE_COMPLETE[name])
        out[scen.name] = run(plan, env)
    if out_dir is not None:
        rows = [r for results in out.values() for r in results]
        write_report(FsPath(out_dir), rows)
    return out
