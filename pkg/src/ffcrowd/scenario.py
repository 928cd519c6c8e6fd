"""World description: parsing, validation, serialization and grid discretization.

Scenario files are JSON objects with the top-level keys ``world``,
``obstacles``, ``goals``, ``groups`` and ``ff``; ``ffa`` and ``fog`` are
optional parameter blocks. Coordinates are meters with the origin at the
bottom-left corner, x to the right and y up.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np
import shapely
from shapely.geometry import Polygon, box

DEFAULT_CELL_SIZE = 2.0
DEFAULT_MARKER_DENSITY = 5.0
DEFAULT_FRAME_DT = 0.02


class ScenarioError(ValueError):
    """Semantic problem with a scenario (an invariant does not hold)."""


class ScenarioSyntaxError(ScenarioError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h


@dataclass(frozen=True)
class OceanVector:
    o: float
    c: float
    e: float
    a: float
    n: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.o, self.c, self.e, self.a, self.n)


@dataclass(frozen=True)
class Obstacle:
    polygon: tuple[tuple[float, float], ...]

    def shape(self) -> Polygon:
        return Polygon(self.polygon)

    @property
    def area(self) -> float:
        return self.shape().area


@dataclass(frozen=True)
class Goal:
    id: str
    x: float
    y: float


@dataclass(frozen=True)
class GroupSpec:
    count: int
    spawn: Rect
    goal_id: str
    ocean: OceanVector | None = None


WEIBULL_SHAPE = 1.5
# keeps the crowd multiplier near 0.9 at about five neighbours within the
# interaction radius, the typical count around an agent in the built-in crowds
WEIBULL_SCALE = 24.0
IP_RADIUS = 2.0
# overlaps thinner than float noise (m^2) do not block a cell
BLOCK_AREA_EPS = 1e-12
BODY_RADIUS = 0.3


@dataclass(frozen=True)
class FFAParams:
    """Fast-forward tuning."""

    weibull_shape: float = WEIBULL_SHAPE
    weibull_scale: float = WEIBULL_SCALE
    ip_radius: float = IP_RADIUS
    body_radius: float = BODY_RADIUS


@dataclass(frozen=True)
class VisionSpec:
    kind: str  # "tower" or "dynamic"
    shape: str  # "circle" or "rect"
    params: tuple[float, ...]  # (cx, cy, r) or (x, y, w, h)
    active: bool = True


@dataclass(frozen=True)
class FogSpec:
    subdivision: int = 2
    sources: tuple[VisionSpec, ...] = ()


@dataclass(frozen=True)
class Scenario:
    width: float
    height: float
    goals: tuple[Goal, ...]
    groups: tuple[GroupSpec, ...]
    stop_frame: int
    target_frame: int
    obstacles: tuple[Obstacle, ...] = ()
    cell_size: float = DEFAULT_CELL_SIZE
    marker_density: float = DEFAULT_MARKER_DENSITY
    frame_dt: float = DEFAULT_FRAME_DT
    seed: int = 0
    ffa: FFAParams = field(default_factory=FFAParams)
    fog: FogSpec = field(default_factory=FogSpec)
    name: str = ""

    @property
    def n_agents(self) -> int:
        return sum(g.count for g in self.groups)

    def goal(self, goal_id: str) -> Goal:
        for g in self.goals:
            if g.id == goal_id:
                return g
        raise ScenarioError(f"unknown goal {goal_id!r}")

    def with_seed(self, seed: int) -> "Scenario":
        from dataclasses import replace

        return replace(self, seed=int(seed))

    def validate(self) -> "Scenario":
        if not (self.width > 0 and self.height > 0):
            raise ScenarioError("world width and height must be positive")
        if not self.cell_size > 0:
            raise ScenarioError("cell_size must be positive")
        if not self.frame_dt > 0:
            raise ScenarioError("frame_dt must be positive")
        if not self.marker_density > 0:
            raise ScenarioError("marker_density must be positive")
        if self.seed < 0:
            raise ScenarioError("seed must be a non-negative integer")
        if not (self.target_frame > self.stop_frame >= 0):
            raise ScenarioError("ff frames must satisfy target_frame > stop_frame >= 0")
        ids = [g.id for g in self.goals]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate goal id")
        world = box(0.0, 0.0, self.width, self.height)
        for i, ob in enumerate(self.obstacles):
            if len(ob.polygon) < 3:
                raise ScenarioError(f"obstacle {i}: polygon needs at least 3 points")
            poly = ob.shape()
            if not poly.is_valid or not poly.exterior.is_simple:
                raise ScenarioError(f"obstacle {i}: polygon is not simple")
            if poly.area <= 0:
                raise ScenarioError(f"obstacle {i}: polygon area must be positive")
        for g in self.goals:
            if not world.covers(shapely.Point(g.x, g.y)):
                raise ScenarioError(f"goal {g.id!r} lies outside the world")
            if any(ob.shape().contains(shapely.Point(g.x, g.y)) for ob in self.obstacles):
                raise ScenarioError(f"goal {g.id!r} lies inside an obstacle")
        for i, grp in enumerate(self.groups):
            if grp.count < 1:
                raise ScenarioError(f"group {i}: count must be >= 1")
            if grp.goal_id not in ids:
                raise ScenarioError(f"group {i}: unknown goal {grp.goal_id!r}")
            s = grp.spawn
            if s.w < 0 or s.h < 0 or s.x < 0 or s.y < 0 or s.x + s.w > self.width or s.y + s.h > self.height:
                raise ScenarioError(f"group {i}: spawn region must lie inside the world bounds")
            if grp.ocean is not None:
                for name, v in zip("OCEAN", (grp.ocean.o, grp.ocean.c, grp.ocean.e, grp.ocean.a, grp.ocean.n)):
                    if not 0.0 <= v <= 1.0:
                        raise ScenarioError(f"group {i}: OCEAN {name}={v} outside [0, 1]")
        p = self.ffa
        if not (p.weibull_shape > 0 and p.weibull_scale > 0 and p.ip_radius > 0 and p.body_radius >= 0):
            raise ScenarioError("ffa parameters must be positive")
        if self.fog.subdivision < 1:
            raise ScenarioError("fog subdivision must be >= 1")
        for src in self.fog.sources:
            if src.kind not in ("tower", "dynamic"):
                raise ScenarioError(f"unknown vision source kind {src.kind!r}")
            if src.shape == "circle":
                if len(src.params) != 3 or src.params[2] <= 0:
                    raise ScenarioError("circle vision source needs positive radius")
            elif src.shape == "rect":
                if len(src.params) != 4 or src.params[2] <= 0 or src.params[3] <= 0:
                    raise ScenarioError("rect vision source must be non-degenerate")
            else:
                raise ScenarioError(f"unknown vision source shape {src.shape!r}")
        return self


# --------------------------------------------------------------------------
# File format


def _req(obj: dict, key: str, where: str) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise ScenarioError(f"missing key {key!r} in {where}")
    return obj[key]


def _num(v: Any, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{what} must be a number")
    return float(v)


def _int(v: Any, what: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ScenarioError(f"{what} must be an integer")
    return int(v)


def _vision_from_dict(d: dict) -> VisionSpec:
    kind = d.get("kind", "tower")
    active = bool(d.get("active", True))
    if "r" in d:
        params = (_num(d["x"], "vision x"), _num(d["y"], "vision y"), _num(d["r"], "vision r"))
        return VisionSpec(kind, "circle", params, active)
    params = tuple(_num(d[k], f"vision {k}") for k in ("x", "y", "w", "h"))
    return VisionSpec(kind, "rect", params, active)


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be an object")
    world = _req(doc, "world", "document")
    ff = _req(doc, "ff", "document")
    obstacles = tuple(
        Obstacle(tuple((_num(p[0], "x"), _num(p[1], "y")) for p in _req(o, "polygon", "obstacle")))
        for o in doc.get("obstacles", [])
    )
    goals = tuple(
        Goal(str(_req(g, "id", "goal")), _num(_req(g, "x", "goal"), "goal x"), _num(_req(g, "y", "goal"), "goal y"))
        for g in _req(doc, "goals", "document")
    )
    groups = []
    for g in _req(doc, "groups", "document"):
        sp = _req(g, "spawn", "group")
        ocean = g.get("ocean")
        groups.append(
            GroupSpec(
                count=_int(_req(g, "count", "group"), "group count"),
                spawn=Rect(*(_num(_req(sp, k, "spawn"), f"spawn {k}") for k in ("x", "y", "w", "h"))),
                goal_id=str(_req(g, "goal", "group")),
                ocean=None if ocean is None else OceanVector(
                    *(_num(_req(ocean, k, "ocean"), f"ocean {k}") for k in ("o", "c", "e", "a", "n"))
                ),
            )
        )
    ffa_doc = doc.get("ffa", {})
    unknown = sorted(set(ffa_doc) - {f.name for f in fields(FFAParams)})
    if unknown:
        raise ScenarioError(f"unknown ffa parameter(s): {', '.join(unknown)}")
    ffa = FFAParams(**{k: _num(v, f"ffa {k}") for k, v in ffa_doc.items()}) if ffa_doc else FFAParams()
    fog_doc = doc.get("fog", {})
    fog = FogSpec(
        subdivision=_int(fog_doc.get("subdivision", 2), "fog subdivision"),
        sources=tuple(_vision_from_dict(v) for v in fog_doc.get("sources", [])),
    )
    try:
        scen = Scenario(
            width=_num(_req(world, "width", "world"), "width"),
            height=_num(_req(world, "height", "world"), "height"),
            cell_size=_num(world.get("cell_size", DEFAULT_CELL_SIZE), "cell_size"),
            marker_density=_num(world.get("marker_density", DEFAULT_MARKER_DENSITY), "marker_density"),
            frame_dt=_num(world.get("frame_dt", DEFAULT_FRAME_DT), "frame_dt"),
            seed=_int(world.get("seed", 0), "seed"),
            obstacles=obstacles,
            goals=goals,
            groups=tuple(groups),
            stop_frame=_int(_req(ff, "stop_frame", "ff"), "stop_frame"),
            target_frame=_int(_req(ff, "target_frame", "ff"), "target_frame"),
            ffa=ffa,
            fog=fog,
            name=str(doc.get("name", "")),
        )
    except TypeError as exc:  # unknown ffa keys
        raise ScenarioError(str(exc)) from None
    return scen.validate()


def parse_scenario(text: str) -> Scenario:
    """Parse scenario-file contents into a validated :class:`Scenario`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioSyntaxError(exc.msg, exc.lineno) from None
    return scenario_from_dict(doc)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def scenario_to_dict(s: Scenario) -> dict:
    doc: dict[str, Any] = {}
    if s.name:
        doc["name"] = s.name
    doc["world"] = {
        "width": s.width,
        "height": s.height,
        "cell_size": s.cell_size,
        "marker_density": s.marker_density,
        "frame_dt": s.frame_dt,
        "seed": s.seed,
    }
    doc["obstacles"] = [{"polygon": [list(p) for p in ob.polygon]} for ob in s.obstacles]
    doc["goals"] = [{"id": g.id, "x": g.x, "y": g.y} for g in s.goals]
    groups = []
    for g in s.groups:
        d: dict[str, Any] = {
            "count": g.count,
            "spawn": {"x": g.spawn.x, "y": g.spawn.y, "w": g.spawn.w, "h": g.spawn.h},
            "goal": g.goal_id,
        }
        if g.ocean is not None:
            d["ocean"] = dict(zip("ocean", g.ocean.as_tuple()))
        groups.append(d)
    doc["groups"] = groups
    doc["ff"] = {"stop_frame": s.stop_frame, "target_frame": s.target_frame}
    if s.ffa != FFAParams():
        doc["ffa"] = {
            "weibull_shape": s.ffa.weibull_shape,
            "weibull_scale": s.ffa.weibull_scale,
            "ip_radius": s.ffa.ip_radius,
            "body_radius": s.ffa.body_radius,
        }
    if s.fog != FogSpec():
        sources = []
        for v in s.fog.sources:
            keys = ("x", "y", "r") if v.shape == "circle" else ("x", "y", "w", "h")
            sources.append({"kind": v.kind, **dict(zip(keys, v.params)), "active": v.active})
        doc["fog"] = {"subdivision": s.fog.subdivision, "sources": sources}
    return doc


def serialize_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


# --------------------------------------------------------------------------
# Grid


@dataclass(frozen=True, eq=False)
class Grid:
    """Square-cell discretization of the world; ``blocked[row, col]``, row 0 at the bottom."""

    cols: int
    rows: int
    cell_size: float
    width: float
    height: float
    blocked: np.ndarray

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """(col, row) containing the point; points on the far boundary map inward."""
        c = min(max(int(math.floor(x / self.cell_size)), 0), self.cols - 1)
        r = min(max(int(math.floor(y / self.cell_size)), 0), self.rows - 1)
        return c, r

    def center(self, col: int, row: int) -> tuple[float, float]:
        return ((col + 0.5) * self.cell_size, (row + 0.5) * self.cell_size)

    def cell_bounds(self, col: int, row: int) -> tuple[float, float, float, float]:
        """Cell square clipped to the world: (x0, y0, x1, y1)."""
        cs = self.cell_size
        return (col * cs, row * cs, min((col + 1) * cs, self.width), min((row + 1) * cs, self.height))

    def is_blocked(self, col: int, row: int) -> bool:
        if not (0 <= col < self.cols and 0 <= row < self.rows):
            return True
        return bool(self.blocked[row, col])

    @property
    def n_blocked(self) -> int:
        return int(self.blocked.sum())


def build_grid(s: Scenario) -> Grid:
    cs = s.cell_size
    cols = int(math.ceil(s.width / cs - 1e-9))
    rows = int(math.ceil(s.height / cs - 1e-9))
    blocked = np.zeros((rows, cols), dtype=bool)
    for ob in s.obstacles:
        poly = ob.shape()
        minx, miny, maxx, maxy = poly.bounds
        c0, c1 = max(int(minx // cs) - 1, 0), min(int(maxx // cs) + 1, cols - 1)
        r0, r1 = max(int(miny // cs) - 1, 0), min(int(maxy // cs) + 1, rows - 1)
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                if blocked[r, c]:
                    continue
                # positive-area overlap; touching along an edge does not block
                if poly.intersection(box(c * cs, r * cs, (c + 1) * cs, (r + 1) * cs)).area > BLOCK_AREA_EPS:
                    blocked[r, c] = True
    blocked.setflags(write=False)
    return Grid(cols, rows, cs, s.width, s.height, blocked)


def obstacle_union(s: Scenario):
    """Prepared union of all obstacles, or None for an open world."""
    if not s.obstacles:
        return None
    geom = shapely.union_all([ob.shape() for ob in s.obstacles])
    shapely.prepare(geom)
    return geom


def spawn_positions(s: Scenario, grid: Grid, rng: np.random.Generator, min_sep: float = 0.6) -> list[tuple[int, np.ndarray]]:
    """Draw (group index, position) for every agent in declaration order.

    Positions are uniform in each group's spawn rectangle, rejecting points in
    blocked cells and, when possible, points closer than ``min_sep`` to an
    earlier agent.
    """
    out: list[tuple[int, np.ndarray]] = []
    placed: list[np.ndarray] = []
    for gi, grp in enumerate(s.groups):
        sp = grp.spawn
        for _ in range(grp.count):
            fallback = None
            for attempt in range(2000):
                p = np.array([sp.x + rng.random() * sp.w, sp.y + rng.random() * sp.h])
                if grid.is_blocked(*grid.cell_of(p[0], p[1])):
                    continue
                if fallback is None:
                    fallback = p
                if all(np.hypot(*(p - q)) >= min_sep for q in placed):
                    break
            else:
                if fallback is None:
                    raise ScenarioError(f"group {gi}: spawn region has no free cell")
                p = fallback
            placed.append(p)
            out.append((gi, p))
    return out
