import sys

import numpy as np
import pytest

from lazydash.geometry import ObjectModel, RobotModel, Surface, Wall, World
from lazydash.harness import Scenario


def make_world(robots, objects, surfaces, walls=(), bounds=(-2.0, -2.0, 2.0, 2.0), hw=0.02):
    rs = [RobotModel(i, tuple(b), reach, r_arm, v) for i, (b, reach, r_arm, v) in enumerate(robots)]
    os_ = [ObjectModel(j, rad, tuple(s), tuple(g)) for j, (rad, s, g) in enumerate(objects)]
    ss = [Surface(f"s{k}", *box) for k, box in enumerate(surfaces)]
    ws = [Wall(tuple(a), tuple(b)) for a, b in walls]
    return World(tuple(bounds), ws, hw, ss, rs, os_)


def one_robot_world(start=(0.5, 0.0), goal=(-0.5, 0.0)):
    """One robot at the origin, one object moving between two side tables."""
    return make_world(
        robots=[((0.0, 0.0), 0.85, 0.04, 1.0)],
        objects=[(0.05, start, goal)],
        surfaces=[(0.4, -0.45, 0.6, 0.45), (-0.6, -0.45, -0.4, 0.45)],
        bounds=(-1.0, -1.0, 1.0, 1.0),
    )


def two_robot_world():
    """Two robots whose reach discs overlap in a lens; the object crosses from A to B."""
    return make_world(
        robots=[((-0.6, 0.0), 0.8, 0.04, 1.0), ((0.6, 0.0), 0.8, 0.04, 1.0)],
        objects=[(0.05, (-1.1, 0.0), (1.1, 0.0))],
        surfaces=[(-1.2, -0.2, -1.0, 0.2), (1.0, -0.2, 1.2, 0.2)],
        bounds=(-1.5, -1.5, 1.5, 1.5),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def open_scenario():
    return Scenario("open-1", one_robot_world())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "LINES", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
