import math

import numpy as np
import pytest

from glueopt.geometry import CurveNetwork, Disc, Polygon
from glueopt.problem import Problem
from glueopt.solver import ConstantSource, GaussianSource


def polygon_net(pts, closed=False):
    pts = np.asarray(pts, dtype=float)
    if closed:
        pts = np.vstack([pts, pts[:1]])
    return CurveNetwork.from_polylines([pts])


def circle_net(r=0.5, n=64, center=(0.0, 0.0)):
    th = np.linspace(0, 2 * math.pi, n + 1)[:-1]
    pts = np.c_[center[0] + r * np.cos(th), center[1] + r * np.sin(th)]
    return polygon_net(pts, closed=True)


def star_net(center, angles_deg, length):
    c = np.asarray(center, dtype=float)
    arms = [np.array([c, c + length * np.array([math.cos(math.radians(a)), math.sin(math.radians(a))])])
            for a in angles_deg]
    return CurveNetwork.from_polylines(arms)


UNIT_SQUARE = Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
L_SHAPE = Polygon([(0, 0), (1, 0), (1, 0.5), (0.5, 0.5), (0.5, 1), (0, 1)])
DIAMETER = CurveNetwork.from_polylines([[(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)]])


def corpus():
    """Small solved-instance corpus shared by the identity and stability checks."""
    bumps = GaussianSource(tuple(((0.5 * math.cos(a), 0.5 * math.sin(a)), 20.0, 0.07)
                                 for a in np.radians([90, 210, 330])))
    return [
        ("disc-empty", Problem(Disc(), ConstantSource(1.0), 1.0), None),
        ("disc-diameter", Problem(Disc(), ConstantSource(1.0), 1.0), DIAMETER),
        ("disc-circle", Problem(Disc(), ConstantSource(1.0), 0.5), circle_net()),
        ("disc-y-gauss", Problem(Disc(), bumps, 0.05), star_net((0, 0), [100, 210, 330], 0.7)),
        ("disc-tip", Problem(Disc(), ConstantSource(1.0), 1.0),
         CurveNetwork.from_polylines([[(-1.0, 0.0), (0.0, 0.0)]])),
        ("square-empty", Problem(UNIT_SQUARE, ConstantSource(1.0), 1.0, h=1 / 64), None),
        ("square-diagonal", Problem(UNIT_SQUARE, ConstantSource(2.0), 1.0, h=1 / 64),
         CurveNetwork.from_polylines([[(0.0, 0.0), (1.0, 1.0)]])),
        ("lshape-slit", Problem(L_SHAPE, ConstantSource(1.0), 1.0, h=1 / 64),
         CurveNetwork.from_polylines([[(0.1, 0.25), (0.5, 0.25)]])),
    ]


@pytest.fixture(scope="session")
def solved_corpus():
    out = []
    for name, pb, net in corpus():
        out.append((name, pb, net, pb.solve(net)))
    return out


@pytest.fixture(scope="session")
def disc_pb():
    return Problem(Disc(), ConstantSource(1.0), 1.0)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def record_criterion(number, ok: bool, detail: str):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES[str(number)] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.rstrip("ab")), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
