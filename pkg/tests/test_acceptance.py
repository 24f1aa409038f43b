"""Acceptance gate: each criterion at its stated tolerance, one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -v``; the lines are also printed in the
terminal summary.  ``tests/data/make_baseline.py`` regenerates the stored
diagnostics baseline used by criterion 9.
"""

import json
import math
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from glueopt import diagnostics as dg
from glueopt import dualcheck as dc
from glueopt import geometry as geo
from glueopt import optimizer as opt
from glueopt import solver as sv
from glueopt.geometry import CurveNetwork, Disc
from glueopt.problem import Problem
from glueopt.solver import ConstantSource, GaussianSource

from conftest import DIAMETER, UNIT_SQUARE, circle_net, corpus, record_criterion, star_net

DATA = Path(__file__).parent / "data"
BASELINE = DATA / "criterion6_baseline.json"


def square_series(terms=400):
    """Independent oracle: ``½∫u`` on the unit square from the double sine series."""
    m = np.arange(1, 2 * terms, 2, dtype=float)
    M, N = np.meshgrid(m, m)
    return float(32 / math.pi ** 6 * np.sum(1.0 / (M ** 2 * N ** 2 * (M ** 2 + N ** 2))))


def disc_compliance(h):
    g = sv.make_grid(Disc(), h)
    f = ConstantSource(1.0)
    return sv.compliance(sv.solve_membrane(g, sv.rasterize_dirichlet(None, g), f), f)


# shared runs ---------------------------------------------------------------

def criterion6_problem():
    return Problem(Disc(), ConstantSource(1.0), 0.5, h=1 / 64)


def criterion6_run():
    pb = criterion6_problem()
    t0 = time.perf_counter()
    traj = opt.run_optimize(pb, circle_net(0.5, 64))
    return pb, traj, time.perf_counter() - t0


def criterion9_diagnostics(net: CurveNetwork, h: float) -> dict:
    """Chord-arc constant, Ahlfors densities and flatness profiles on fixed samples."""
    pts = geo.sample_network(net, 16)
    radii = np.geomspace(4 * h, 0.2, 6)
    dens = [[geo.ahlfors_density(net, x, r) for r in radii] for x in pts]
    beta = [[geo.flatness(net, x, r) for r in radii] for x in pts]
    return {
        "network": geo.format_network(net),
        "points": pts.tolist(),
        "radii": radii.tolist(),
        "chord_arc": geo.chord_arc_constant(net, 64),
        "ahlfors": dens,
        "ahlfors_range": [float(np.min(dens)), float(np.max(dens))],
        "beta": beta,
    }


@pytest.fixture(scope="module")
def run6():
    return criterion6_run()


# criteria ------------------------------------------------------------------

def test_criterion_1_disc_oracle():
    t0 = time.perf_counter()
    C = disc_compliance(1 / 64)
    dt = time.perf_counter() - t0
    err = abs(C - math.pi / 16) / (math.pi / 16)
    ok = err <= 0.02 and dt < 5.0
    assert record_criterion(1, ok, f"C={C:.6f} rel_err={err:.2e} time={dt:.2f}s")


def test_criterion_2_square_oracle():
    oracle = square_series(400)
    assert abs(square_series(200) - oracle) / oracle < 1e-6
    g = sv.make_grid(UNIT_SQUARE, 1 / 128)
    f = ConstantSource(1.0)
    C = sv.compliance(sv.solve_membrane(g, sv.rasterize_dirichlet(None, g), f), f)
    err = abs(C - oracle) / oracle
    assert record_criterion(2, err <= 0.02, f"C={C:.6f} oracle={oracle:.6f} rel_err={err:.2e}")


def test_criterion_3_energy_identity():
    worst = 0.0
    ok = True
    for name, pb, net in corpus():
        u = pb.solve(net)
        C = sv.compliance(u, pb.source, pb.grid)
        bound = 10 * pb.cg_tol * max(1.0, C)
        d = abs(0.5 * sv.dirichlet_energy(u) - C)
        rep = dc.duality_gap(pb, net)
        ok &= d <= bound and rep.gap <= bound
        worst = max(worst, d / bound, rep.gap / bound)
    assert record_criterion(3, ok, f"instances={len(corpus())} worst_ratio_to_bound={worst:.2e}")


def test_criterion_4_monotonicity():
    h = 1 / 256
    pb = Problem(Disc(), ConstantSource(1.0), 1.0, h=h)
    t0 = time.perf_counter()
    u = pb.solve(DIAMETER)
    radii = [8 * h * 2 ** k for k in range(int(math.log2(0.25 / (8 * h))) + 1)]
    probes = [(0.0, 0.0), (0.2, 0.0), (-0.2, 0.0), (0.4, 0.0), (-0.4, 0.0)]
    worst = math.inf
    ok = True
    for x in probes:
        assert float(pb.domain.boundary_distance(np.array([x]))[0]) > 0.3
        prof = dg.monotonicity_profile(u, pb.grid, DIAMETER, pb.domain, x, radii, pb.p, gamma=math.pi)
        ok &= prof.is_nondecreasing(0.01)
        worst = min(worst, float(prof.relative_steps().min()))
    dt = time.perf_counter() - t0
    ok &= dt < 30.0
    assert record_criterion(4, ok, f"radii={len(radii)} worst_relative_step={worst:+.3f} "
                                   f"(slack -0.01) time={dt:.1f}s")


def test_criterion_5a_cracktip_endpoint():
    g = sv.make_grid(Disc(), 1 / 256)
    u = dg.cracktip_field(g, (0, 0), math.pi)
    half = CurveNetwork.from_polylines([[(-1.0, 0.0), (0.0, 0.0)]])
    rep = dg.blowup_classify(u, g, half, Disc(), (0, 0), [0.2, 0.1, 0.05])
    ok = rep.cls == "Endpoint" and abs(rep.e_x - 0.25) <= 0.05 * 0.25
    assert record_criterion("5a", ok, f"class={rep.cls} e_x={rep.e_x:.4f}")


def test_criterion_5b_chord_regular():
    pb = Problem(Disc(), ConstantSource(1.0), 1.0, h=1 / 256)
    u = pb.solve(DIAMETER)
    x = (0.1, 0.0)
    rep = dg.blowup_classify(u, pb.grid, DIAMETER, pb.domain, x, [0.2, 0.1, 0.05])
    e05 = sv.local_energy(u, pb.grid, x, 0.05) / 0.05
    ok = rep.cls == "Regular" and e05 <= 0.02
    assert record_criterion("5b", ok, f"class={rep.cls} G(0.05)/0.05={e05:.4f} (bound 0.02) "
                                      f"e_x={rep.e_x:.4f}")


def test_criterion_6_no_loop(run6):
    pb, traj, dt = run6
    final = traj[-1]
    Fs = [s.F for s in traj]
    moves = Counter(r["move"] for r in final.log)
    ok = (not geo.contains_loop(final.network) and all(b < a for a, b in zip(Fs, Fs[1:]))
          and moves["cut_loop"] >= 1 and dt < 300.0)
    assert record_criterion(6, ok, f"loop_free={not geo.contains_loop(final.network)} "
                                   f"cuts={moves['cut_loop']} accepted={len(traj) - 1} "
                                   f"F {Fs[0]:.5f}->{Fs[-1]:.5f} time={dt:.0f}s")


def test_criterion_7_triple_point():
    angs = np.radians([90, 210, 330])
    src = GaussianSource(tuple(((0.5 * math.cos(a), 0.5 * math.sin(a)), 20.0, 0.07) for a in angs))
    pb = Problem(Disc(), src, 0.05, h=1 / 64)
    init = star_net((0, 0), [100, 210, 330], 0.7)
    sched = opt.Schedule(max_iter=60)
    st0 = opt.initial_state(pb, init, sched.spacing_h * pb.h)
    r0 = opt.stationarity_residual(pb, st0)
    traj = opt.run_optimize(pb, init, sched)
    final = traj[-1]
    deg = final.network.degree()
    ok = bool(np.sum(deg == 3) == 1)
    angles = dg.triple_angles(final.network, int(np.flatnonzero(deg == 3)[0])) if ok else ()
    ratio = opt.stationarity_residual(pb, final) / r0
    ok = ok and all(abs(a - 120.0) <= 5.0 for a in angles) and ratio <= 0.1
    assert record_criterion(7, ok, f"angles={tuple(round(a, 1) for a in angles)} "
                                   f"residual_ratio={ratio:.3f}")


def test_criterion_8_dual_feasibility():
    worst = 0.0
    for name, pb, net in corpus():
        u = pb.solve(net)
        res, _ = dc.divergence_residual(dc.gradient_flux(u), pb.source, pb.grid, u.mask)
        worst = max(worst, res)
    pb = Problem(Disc(), ConstantSource(1.0), 1.0)
    u = pb.solve(DIAMETER)
    s = dc.gradient_flux(u)
    res0, _ = dc.divergence_residual(s, pb.source, pb.grid, u.mask)
    e0 = dc.flux_energy(s)
    rng = np.random.default_rng(2024)
    cx = (pb.grid.xs[:-1] + pb.grid.xs[1:]) / 2
    cy = (pb.grid.ys[:-1] + pb.grid.ys[1:]) / 2
    X, Y = np.meshgrid(cx, cy)
    dominated = 0
    for _ in range(10):
        c = (rng.uniform(-0.3, 0.3), rng.choice([-1, 1]) * rng.uniform(0.3, 0.5))
        w = rng.uniform(0.08, 0.15)
        q = 1 - ((X - c[0]) ** 2 + (Y - c[1]) ** 2) / w ** 2
        psi = rng.normal() * np.where(q > 0, q ** 3, 0.0)
        sp = s + dc.curl_field(pb.grid, psi)
        res, _ = dc.divergence_residual(sp, pb.source, pb.grid, u.mask)
        dominated += abs(res - res0) <= 1e-12 and dc.flux_energy(sp) >= e0
    ok = worst <= 1e-8 and dominated == 10
    assert record_criterion(8, ok, f"max_residual={worst:.2e} dominated={dominated}/10")


def test_criterion_9_diagnostics_regression(run6):
    pb, traj, _ = run6
    base = json.loads(BASELINE.read_text())
    now = criterion9_diagnostics(traj[-1].network, pb.h)
    same_net = now["network"] == base["network"]
    diffs = [abs(now["chord_arc"] - base["chord_arc"])]
    diffs += [abs(a - b) for ra, rb in zip(now["ahlfors"], base["ahlfors"]) for a, b in zip(ra, rb)]
    diffs += [abs(a - b) for ra, rb in zip(now["beta"], base["beta"]) for a, b in zip(ra, rb)]
    shapes = (np.shape(now["ahlfors"]) == np.shape(base["ahlfors"])
              and np.shape(now["beta"]) == np.shape(base["beta"]))
    upper = float(np.max(now["ahlfors"]))
    bounded = math.isfinite(upper) and upper <= base["ahlfors_range"][1] * (1 + 1e-9)
    ok = same_net and shapes and max(diffs) <= 1e-9 and bounded
    assert record_criterion(9, ok, f"network_identical={same_net} max_diff={max(diffs):.1e} "
                                   f"ahlfors_max={upper:.4g} envelope={base['ahlfors_range'][1]:.4g}")


def test_criterion_10_grid_convergence():
    errs = [abs(disc_compliance(1 / n) - math.pi / 16) for n in (16, 32, 64, 128)]
    ok = all(b < a for a, b in zip(errs, errs[1:]))
    assert record_criterion(10, ok, "errors=" + ",".join(f"{e:.2e}" for e in errs))
