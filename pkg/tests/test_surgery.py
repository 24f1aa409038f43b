import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glueopt import geometry as geo
from glueopt import surgery
from glueopt.geometry import Disc

from conftest import circle_net, polygon_net, star_net


def test_split_polyline_flags():
    pl = np.array([(-1.0, 0.0), (1.0, 0.0)])
    pieces, flags = surgery.split_polyline(pl, (0, 0), 0.5)
    assert flags == [False, True, False]
    assert np.allclose(pieces[1][[0, -1]], [(-0.5, 0), (0.5, 0)])


def test_chord_replacement():
    net = polygon_net([(-1, 0), (0, 0.3), (1, 0)])
    cand = surgery.chord_replacement(net, (0, 0.3), 0.5)
    assert geo.is_connected(cand) and geo.total_length(cand) < geo.total_length(net)
    assert surgery.chord_replacement(star_net((0, 0), [0, 120, 240], 1), (0, 0), 0.5) is None


def test_circle_wall_contains_circle():
    net = polygon_net([(-0.9, 0), (0.9, 0)])
    cand = surgery.circle_wall(net, Disc(), (0, 0), 0.3, 0.01)
    assert geo.is_connected(cand)
    inside = geo.ahlfors_density(cand, (0, 0), 0.3 * (1 + 1e-6)) * 0.3
    assert inside == pytest.approx(2 * math.pi * 0.3, rel=1e-3)


def test_remove_subarc_opens_loop():
    net = circle_net(0.5)
    cand = surgery.remove_subarc(net, 0, net.vertices[5], 0.05)
    assert geo.is_connected(cand) and not geo.contains_loop(cand)
    assert geo.total_length(cand) == pytest.approx(geo.total_length(net) - 0.1, abs=0.01)


def test_merge_degree_two():
    net = geo.CurveNetwork.from_polylines([[(0, 0), (1, 0)], [(1, 0), (2, 1)]])
    merged = surgery.merge_degree_two(net)
    assert len(merged.edges) == 1 and len(merged.nodes) == 2
    assert geo.total_length(merged) == pytest.approx(geo.total_length(net))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.02, 0.3))
def test_resample_spacing(spacing):
    net = circle_net(0.5, 16)
    res = surgery.resample(net, spacing)
    seg = np.hypot(*np.diff(res.polyline(0), axis=0).T)
    # the segment count is rounded, so steps stay within 1.5 spacing
    assert seg.max() <= 1.5 * spacing + 1e-9 or len(seg) == 3
    assert geo.total_length(res) <= geo.total_length(net) + 1e-12
