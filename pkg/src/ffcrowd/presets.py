"""Built-in scenario suites.

Geometry is reconstructed from the experiment descriptions: agent counts,
world sizes, obstacle counts and total obstacle areas, and stop/target frames
follow the experiments; exact coordinates are fixtures of this package.
"""
from __future__ import annotations

import math
import os
from pathlib import Path as FsPath

from .scenario import (FogSpec, Goal, GroupSpec, Obstacle, OceanVector, Rect, Scenario,
                       VisionSpec, serialize_scenario)


def rect_obstacle(x0: float, y0: float, x1: float, y1: float) -> Obstacle:
    return Obstacle(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


# --------------------------------------------------------------------------
# 30 x 30 m suites, jump 600 -> 1000

HOUSES_OBSTACLES = (
    rect_obstacle(6.0, 9.0, 10.0, 13.0),
    rect_obstacle(19.0, 8.0, 23.0, 12.0),
    rect_obstacle(16.0, 20.0, 21.0, 23.0),
)

_SW_SPAWN = Rect(1.0, 1.0, 4.0, 4.0)
_SE_SPAWN = Rect(25.0, 1.0, 4.0, 4.0)
_NE_GOAL = Goal("g1", 27.0, 27.0)
_NW_GOAL = Goal("g2", 3.0, 27.0)

TABLE4_OCEAN = {
    1: OceanVector(0.5, 0.5, 0.8, 0.5, 0.8),
    2: OceanVector(0.5, 0.5, 0.2, 0.5, 0.8),
    3: OceanVector(0.5, 0.8, 0.2, 0.8, 0.5),
    4: OceanVector(0.5, 0.2, 0.8, 0.2, 0.5),
}


def table1(sim: int, obstacles: bool = False, ocean: OceanVector | None = None, name: str | None = None) -> Scenario:
    """Simulations 1-4: 1 agent, 5 agents, 2 x 5 agents, 2 x 10 agents."""
    if sim in (1, 2):
        n = 1 if sim == 1 else 5
        goals = (_NE_GOAL,)
        groups = (GroupSpec(n, _SW_SPAWN, "g1", ocean),)
    elif sim in (3, 4):
        n = 5 if sim == 3 else 10
        goals = (_NE_GOAL, _NW_GOAL)
        groups = (GroupSpec(n, _SW_SPAWN, "g1", ocean), GroupSpec(n, _SE_SPAWN, "g2", ocean))
    else:
        raise ValueError(f"no table-1 simulation {sim}")
    return Scenario(
        width=30.0, height=30.0, goals=goals, groups=groups,
        stop_frame=600, target_frame=1000,
        obstacles=HOUSES_OBSTACLES if obstacles else (),
        name=name or f"table1_{'obs_' if obstacles else ''}sim{sim}",
    ).validate()


def table4(sim: int) -> Scenario:
    """Personality runs: simulation 3 with obstacles, both groups sharing one OCEAN vector."""
    return table1(3, obstacles=True, ocean=TABLE4_OCEAN[sim], name=f"table4_sim{sim}")


# --------------------------------------------------------------------------
# 40 x 23 m comparison suite

COMPARE_COUNTS = (8, 80, 160)
COMPARE_CONFIGS = ("open", "2obs", "7obs", "4obs")


def _seven_blocks() -> tuple[Obstacle, ...]:
    side = math.sqrt(128.68 / 7)
    h = side / 2
    centers = [(10.0, 11.5), (15.0, 5.0), (15.0, 18.0), (20.0, 11.5), (25.0, 5.0), (25.0, 18.0), (30.0, 11.5)]
    return tuple(rect_obstacle(cx - h, cy - h, cx + h, cy + h) for cx, cy in centers)


def _two_blocks() -> tuple[Obstacle, ...]:
    h = (109.71 / 2) / 4.5
    return (rect_obstacle(11.0, 5.5, 15.5, 5.5 + h), rect_obstacle(24.5, 17.5 - h, 29.0, 17.5))


def _four_blocks() -> tuple[Obstacle, ...]:
    w = 17.0
    h = (582.22 / 4) / w
    return (
        rect_obstacle(0.0, 0.0, w, h), rect_obstacle(40.0 - w, 0.0, 40.0, h),
        rect_obstacle(0.0, 23.0 - h, w, 23.0), rect_obstacle(40.0 - w, 23.0 - h, 40.0, 23.0),
    )


COMPARE_OBSTACLES = {
    "open": lambda: (),
    "2obs": _two_blocks,
    "7obs": _seven_blocks,
    "4obs": _four_blocks,
}


def compare(config: str, agents: int) -> Scenario:
    """Horizontal crossing (open, 2obs, 7obs) or four-way crossing (4obs)."""
    obstacles = COMPARE_OBSTACLES[config]()
    if config == "4obs":
        per = agents // 4
        goals = (Goal("east", 39.0, 12.0), Goal("west", 1.0, 12.0), Goal("north", 20.0, 22.0), Goal("south", 20.0, 1.0))
        groups = (
            GroupSpec(per, Rect(0.2, 10.0, 7.8, 4.0), "east"),
            GroupSpec(per, Rect(32.0, 10.0, 7.8, 4.0), "west"),
            GroupSpec(per, Rect(18.0, 0.2, 4.0, 7.8), "north"),
            GroupSpec(agents - 3 * per, Rect(18.0, 15.0, 4.0, 7.8), "south"),
        )
        target = 370
    else:
        per = agents // 2
        goals = (Goal("east", 38.5, 11.5), Goal("west", 1.5, 11.5))
        groups = (
            GroupSpec(per, Rect(0.5, 2.0, 4.0, 19.0), "east"),
            GroupSpec(agents - per, Rect(35.5, 2.0, 4.0, 19.0), "west"),
        )
        target = 400
    return Scenario(
        width=40.0, height=23.0, goals=goals, groups=groups, obstacles=obstacles,
        stop_frame=200, target_frame=target, name=f"compare_{config}_{agents}",
    ).validate()


# --------------------------------------------------------------------------
# fog demo, 30 x 30 m, jump 100 -> 3500

FOG_OBSTACLE = rect_obstacle(9.0, 12.0, 21.0, 18.0)
FOG_TOWERS = (
    VisionSpec("tower", "circle", (7.5, 10.5, 2.5)),
    VisionSpec("tower", "rect", (21.0, 18.0, 3.0, 3.0)),
)
FOG_OCEAN = OceanVector(0.5, 0.5, 0.4, 0.5, 0.5)


def fog_demo(towers: bool = True) -> Scenario:
    return Scenario(
        width=30.0, height=30.0,
        goals=(Goal("flag", 15.0, 28.0),),
        groups=(GroupSpec(1, Rect(14.0, 1.0, 2.0, 2.0), "flag", FOG_OCEAN),),
        obstacles=(FOG_OBSTACLE,),
        stop_frame=100, target_frame=3500,
        fog=FogSpec(2, FOG_TOWERS if towers else ()),
        name="fog_towers" if towers else "fog_hidden",
    ).validate()


# --------------------------------------------------------------------------


def suites() -> dict[str, list[Scenario]]:
    return {
        "table1": [table1(i) for i in range(1, 5)] + [table1(i, obstacles=True) for i in range(1, 5)],
        "table4": [table4(i) for i in range(1, 5)],
        "compare": [compare(c, n) for c in COMPARE_CONFIGS for n in COMPARE_COUNTS],
        "fog": [fog_demo(True), fog_demo(False)],
    }


def presets() -> dict[str, Scenario]:
    """Every built-in scenario by name."""
    return {s.name: s for group in suites().values() for s in group}


def write_presets(out_dir) -> list[FsPath]:
    out = FsPath(out_dir)
    os.makedirs(out, exist_ok=True)
    written = []
    for name, scen in presets().items():
        p = out / f"{name}.json"
        p.write_text(serialize_scenario(scen), encoding="utf-8")
        written.append(p)
    return written
