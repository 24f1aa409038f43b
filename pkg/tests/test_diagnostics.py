import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glueopt import diagnostics as dg
from glueopt import geometry as geo
from glueopt import solver as sv
from glueopt.geometry import CurveNetwork, Disc
from glueopt.problem import Problem
from glueopt.solver import ConstantSource

from conftest import DIAMETER, UNIT_SQUARE, polygon_net, star_net

HALF_LINE = CurveNetwork.from_polylines([[(-1.0, 0.0), (0.0, 0.0)]])


@pytest.fixture(scope="module")
def fine_grid():
    return sv.make_grid(Disc(), 1 / 256)


@pytest.fixture(scope="module")
def tip_field(fine_grid):
    return dg.cracktip_field(fine_grid, (0, 0), math.pi)


@pytest.fixture(scope="module")
def diameter_fine():
    pb = Problem(Disc(), ConstantSource(1.0), 1.0, h=1 / 256)
    return pb, pb.solve(DIAMETER)


# cracktip -----------------------------------------------------------------

def test_cracktip_value():
    assert dg.cracktip_value([(1.0, 0.0)], (0, 0), math.pi)[0] == pytest.approx(
        math.sqrt(1 / (2 * math.pi)), abs=1e-12)
    assert abs(dg.cracktip_value([(-0.7, 0.0)], (0, 0), math.pi)[0]) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(-1, 1), st.floats(0.01, 1))
def test_cracktip_even(x, y):
    a = dg.cracktip_value([(x, y)], (0, 0), math.pi)[0]
    b = dg.cracktip_value([(x, -y)], (0, 0), math.pi)[0]
    assert abs(a - b) <= 1e-12


def test_cracktip_normalization(fine_grid, tip_field):
    for r in (0.05, 0.1, 0.2):
        assert sv.local_energy(tip_field, fine_grid, (0, 0), r) / r == pytest.approx(0.25, rel=0.05)


# monotonicity -------------------------------------------------------------

def test_profile_zero_field():
    g = sv.make_grid(Disc(), 1 / 64)
    u = sv.ScalarField(g, np.zeros(g.shape))
    for p, sign in ((4.0, -1), (math.inf, 0)):
        prof = dg.monotonicity_profile(u, g, DIAMETER, Disc(), (0, 0), [0.125, 0.25, 0.5], p,
                                       gamma=math.pi)
        assert np.sign(round(prof.exponent, 12)) == sign and prof.c_fit == 0.0
        assert np.all(prof.values == 0) and prof.is_nondecreasing()


def test_profile_cracktip(fine_grid, tip_field):
    prof = dg.monotonicity_profile(tip_field, fine_grid, HALF_LINE, Disc(), (0, 0),
                                   [0.05, 0.1, 0.2], math.inf)
    assert prof.gamma == pytest.approx(2 * math.pi) and prof.alpha == pytest.approx(1.0)
    assert np.allclose(prof.energies / prof.radii, 0.25, rtol=0.05)


@pytest.mark.xfail(strict=True, reason="G(r)/r^2 decreases at flat points of a loaded "
                   "line; the gamma = pi hypothesis 1/p' > pi/gamma fails, see decisions ledger")
def test_profile_diameter_center():
    pb = Problem(Disc(), ConstantSource(1.0), 1.0)
    u = pb.solve(DIAMETER)
    h = pb.h
    radii = [8 * h * 2 ** k for k in range(3)]
    prof = dg.monotonicity_profile(u, pb.grid, DIAMETER, pb.domain, (0, 0), radii, pb.p)
    assert prof.is_nondecreasing(0.01)


def test_profile_errors():
    g = sv.make_grid(Disc(), 1 / 64)
    u = sv.ScalarField(g, np.zeros(g.shape))
    with pytest.raises(ValueError):
        dg.monotonicity_profile(u, g, DIAMETER, Disc(), (0, 0), [0.1], math.inf)
    with pytest.raises(ValueError):
        dg.monotonicity_profile(u, g, DIAMETER, Disc(), (0, 0.5), [0.1, 0.2], math.inf)
    with pytest.raises(ValueError):
        dg.monotonicity_profile(u, g, DIAMETER, Disc(), (0.9, 0), [0.1, 0.2], math.inf)


def test_scale_comparison():
    pb = Problem(Disc(), ConstantSource(1.0), 1.0)
    u = pb.solve(DIAMETER)
    for x in [(0, 0), (0.3, 0), (0.1, 0.2)]:
        for r in (0.2, 0.4):
            G = sv.local_energy(u, pb.grid, x, r)
            for a in (0.5, 0.25):
                assert sv.local_energy(u, pb.grid, x, a * r) / (a * r) <= G / (a * r)


def test_flatness_energy_vanishes_toward_small_radii(diameter_fine):
    # at flat points G(r)/r decreases toward 0 as r shrinks
    pb, u = diameter_fine
    radii = [0.2, 0.1, 0.05, 0.025]
    for x in [(0, 0), (0.3, 0), (-0.2, 0)]:
        assert all(geo.flatness(DIAMETER, x, r) <= 0.05 for r in radii)
        e = [sv.local_energy(u, pb.grid, x, r) / r for r in radii]
        assert all(b <= a * 1.05 for a, b in zip(e, e[1:]))


# omega ---------------------------------------------------------------------

def test_omega_zero_source():
    pb = Problem(Disc(), ConstantSource(0.0), 1.0)
    assert dg.omega_lower_bound(pb, DIAMETER, (0, 0), 0.25).value == 0.0


def test_omega_identity_member():
    pb = Problem(Disc(), ConstantSource(1.0), 1.0)
    u = pb.solve(DIAMETER)
    ob = dg.omega_lower_bound(pb, DIAMETER, (0.2, 0), 0.25)
    assert ob.competitors["identity"] == pytest.approx(sv.local_energy(u, pb.grid, (0.2, 0), 0.25) / 0.25)
    assert ob.value >= ob.competitors["identity"]
    with pytest.raises(ValueError):
        dg.omega_lower_bound(pb, DIAMETER, (0, 0), pb.h)


# blow-ups ------------------------------------------------------------------

def test_blowup_endpoint(fine_grid, tip_field):
    rep = dg.blowup_classify(tip_field, fine_grid, HALF_LINE, Disc(), (0, 0), [0.2, 0.1, 0.05])
    assert rep.cls == "Endpoint"
    assert rep.e_x == pytest.approx(0.25, rel=0.05)


def test_blowup_regular_class(diameter_fine):
    pb, u = diameter_fine
    rep = dg.blowup_classify(u, pb.grid, DIAMETER, pb.domain, (0.1, 0), [0.2, 0.1, 0.05])
    assert rep.cls == "Regular" and rep.beta <= 1e-9


@pytest.mark.xfail(strict=True, reason="on a loaded straight line G(r)/r is about pi a^2 r "
                   "= 0.026 at r = 0.05, above 0.02; see decisions ledger")
def test_blowup_regular_density(diameter_fine):
    pb, u = diameter_fine
    assert sv.local_energy(u, pb.grid, (0.1, 0), 0.05) / 0.05 <= 0.02


def test_blowup_triple():
    pb = Problem(Disc(), ConstantSource(1.0), 1.0)
    net = star_net((0, 0), [90, 210, 330], 0.9)
    u = pb.solve(net)
    rep = dg.blowup_classify(u, pb.grid, net, pb.domain, (0, 0), [0.25, 0.125])
    assert rep.cls == "Triple"
    assert np.allclose(rep.angles, 120.0, atol=0.5)


def test_blowup_inconsistent_counts():
    pb = Problem(Disc(), ConstantSource(1.0), 1.0)
    net = CurveNetwork.from_polylines([[(-0.5, 0.0), (0.2, 0.0)], [(0.2, 0.0), (0.5, 0.0)],
                                       [(0.2, 0.0), (0.2, 0.5)]])
    u = pb.solve(net)
    rep = dg.blowup_classify(u, pb.grid, net, pb.domain, (0, 0), [0.3, 0.125])
    assert rep.cls == "Unclassified" and rep.note


def test_blowup_stable_across_radii(solved_corpus):
    for name, pb, net, u in solved_corpus:
        if net is None or not isinstance(pb.domain, Disc):
            continue
        for x in net.vertices[::7]:
            if float(pb.domain.boundary_distance(x[None])[0]) < 0.3:
                continue
            both = dg.blowup_classify(u, pb.grid, net, pb.domain, x, [0.25, 0.125])
            small = dg.blowup_classify(u, pb.grid, net, pb.domain, x, [0.125])
            big = dg.blowup_classify(u, pb.grid, net, pb.domain, x, [0.25])
            if small.cls != big.cls:
                assert both.cls == "Unclassified", name


# junction and boundary angles ---------------------------------------------

def test_triple_angles():
    assert np.allclose(dg.triple_angles(star_net((0, 0), [90, 210, 330], 1), 0), 120)
    assert np.allclose(sorted(dg.triple_angles(star_net((0, 0), [0, 90, 180], 1), 0)),
                       [90, 90, 180])
    with pytest.raises(ValueError):
        dg.triple_angles(polygon_net([(0, 0), (1, 0)]), 0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 359.9), min_size=3, max_size=3, unique=True))
def test_triple_angles_sum(angles):
    if min(abs((a - b + 180) % 360 - 180) for a in angles for b in angles if a != b) < 1e-3:
        return
    assert sum(dg.triple_angles(star_net((0, 0), angles, 1), 0)) == pytest.approx(360.0)


def test_boundary_touch_angles():
    D = Disc()
    tangent = polygon_net([(0.0, 1.0), (-0.5, 1.0)])
    assert dg.boundary_touch_angle(tangent, D, (0.0, 1.0)) == pytest.approx(0.0, abs=1e-9)
    radial = polygon_net([(0.0, 0.0), (1.0, 0.0)])
    assert dg.boundary_touch_angle(radial, D, (1.0, 0.0)) == pytest.approx(90.0)
    slant = polygon_net([(0.5, 0.0), (0.25, 0.25)])
    assert dg.boundary_touch_angle(slant, UNIT_SQUARE, (0.5, 0.0)) == pytest.approx(45.0)
    with pytest.raises(ValueError):
        dg.boundary_touch_angle(radial, D, (0.0, 0.0))


# report --------------------------------------------------------------------

def test_report_no_probes():
    pb = Problem(Disc(), ConstantSource(1.0), 1.0)
    rep = dg.diagnostics_report(pb, DIAMETER, [], [0.1, 0.2])
    assert rep.rows == []
    assert rep.summary["h"] == pb.h and rep.summary["contains_loop"] is False


def test_report_rows():
    pb = Problem(Disc(), ConstantSource(1.0), 1.0)
    rep = dg.diagnostics_report(pb, DIAMETER, [(0, 0), (0.3, 0)], [0.0625, 0.125, 0.25], omega=False)
    assert len(rep.rows) == 6
    assert all(set(row) <= set(dg.DIAGNOSTICS_COLUMNS) for row in rep.rows)
    assert all(row["density"] == pytest.approx(2.0) for row in rep.rows)
    assert all(row["blowup_class"] == "Regular" for row in rep.rows)
