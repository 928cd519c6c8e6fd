import numpy as np
import pytest

from ffcrowd.engine import Agent, MarkerField, SimState
from ffcrowd.scenario import Goal, GroupSpec, Obstacle, Rect, Scenario, build_grid


def make_scenario(width=30.0, height=30.0, agents=1, spawn=(1.0, 1.0, 2.0, 2.0), goal=(27.0, 27.0),
                  obstacles=(), stop=600, target=1000, **kw) -> Scenario:
    return Scenario(
        width=width, height=height,
        goals=(Goal("g", *goal),),
        groups=(GroupSpec(agents, Rect(*spawn), "g"),),
        stop_frame=stop, target_frame=target,
        obstacles=tuple(obstacles), **kw,
    ).validate()


def square(cx, cy, side) -> Obstacle:
    h = side / 2
    return Obstacle(((cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)))


def bare_state(scenario: Scenario, positions, markers=None, goals=None, radius=1.0, max_speed=1.5) -> SimState:
    """A state with hand-placed agents and markers (no spawning, no paths)."""
    grid = build_grid(scenario)
    agents = []
    for i, p in enumerate(positions):
        g = np.asarray(goals[i] if goals is not None else (scenario.goals[0].x, scenario.goals[0].y), float)
        agents.append(Agent(i, 0, "g", g, np.asarray(p, float), max_speed=max_speed, personal_radius=radius))
    m = np.zeros((0, 2)) if markers is None else np.asarray(markers, float).reshape(-1, 2)
    return SimState(scenario, grid, agents, MarkerField(m, np.full(len(m), -1, dtype=int)),
                    np.random.default_rng(0))


@pytest.fixture
def open_world():
    return make_scenario()


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one acceptance line: ``acceptance(criterion, ok, detail)``."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(criterion: int, ok: bool, detail: str) -> None:
        lines.append((criterion, ok, detail))
        print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(lines, key=lambda l: l[0]):
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
