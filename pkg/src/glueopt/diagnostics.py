"""Local diagnostics on solved instances: monotonicity profiles, energy-density
bounds, blow-up classification, junction and boundary angles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geometry as geo
from . import surgery
from .geometry import CurveNetwork, as_point
from .solver import Grid, ScalarField, local_energy

__all__ = [
    "MonotonicityProfile",
    "BlowupReport",
    "OmegaBound",
    "monotonicity_profile",
    "omega_lower_bound",
    "cracktip_value",
    "cracktip_field",
    "blowup_classify",
    "triple_angles",
    "boundary_touch_angle",
    "E_MIN",
    "DiagnosticsReport",
    "DIAGNOSTICS_COLUMNS",
    "diagnostics_report",
]

# normalized energy separating endpoints (analytic value 1/4) from flat points
E_MIN = 0.1
BETA_REGULAR = 0.1


@dataclass
class MonotonicityProfile:
    point: tuple[float, float]
    gamma: float
    alpha: float
    exponent: float
    c_fit: float
    radii: np.ndarray
    energies: np.ndarray
    values: np.ndarray
    p: float
    reliable: bool = True
    hypothesis_met: bool = True

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.radii.tolist(), self.values.tolist()))

    def relative_steps(self) -> np.ndarray:
        v = self.values
        scale = np.maximum(np.abs(v[:-1]), 1e-300)
        return (v[1:] - v[:-1]) / scale

    def is_nondecreasing(self, slack: float = 0.01) -> bool:
        v = self.values
        return bool(np.all(v[1:] >= v[:-1] - slack * np.abs(v[:-1])))


def _conjugate(p: float) -> float:
    return 1.0 if math.isinf(p) else p / (p - 1.0)


def _distance_to_network(net: CurveNetwork, x) -> float:
    if len(net.segments) == 0:
        return math.inf if net.is_empty else float(np.hypot(*(net.nodes[0] - x)))
    return float(geo.point_segment_distance(x[None], net.segments).min())


def monotonicity_profile(u: ScalarField, grid: Grid | None, net: CurveNetwork, domain, x,
                         radii: Sequence[float], p: float, gamma: float | None = None,
                         radial_samples: int = 32) -> MonotonicityProfile:
    """Sample ``r -> G(r)/r^α + C r^(2/p' - α)`` with ``G(r) = ∫_{B_r(x)}|∇u|²``.

    ``γ`` defaults to the sampled :func:`~glueopt.geometry.gamma_sup` over the
    radius range.  ``C`` is the smallest nonnegative constant that makes the
    profile nondecreasing on the smallest quarter of the radii; it is zero
    whenever the correction exponent is nonpositive.
    """
    grid = grid or u.grid
    x = as_point(x)
    r = np.sort(np.asarray(radii, dtype=float))
    if len(r) < 2:
        raise ValueError("need at least two radii")
    if r[0] < 4 * grid.h * (1 - 1e-12):
        raise ValueError("radii must be at least 4h")
    if domain is not None and r[-1] >= float(domain.boundary_distance(x[None])[0]):
        raise ValueError("radii must stay below the distance to the boundary")
    if _distance_to_network(net, x) > grid.h * (1 + 1e-9):
        raise ValueError("probe point must lie within h of the network")
    violated = False
    if gamma is None:
        gamma, violated = geo.gamma_sup(net, domain, x, float(r[0]), float(r[-1]), radial_samples)
    alpha = 2 * math.pi / gamma
    pp = _conjugate(p)
    expo = 2 / pp - alpha
    G = np.array([local_energy(u, grid, x, ri) for ri in r])
    base = G / r ** alpha
    c = 0.0
    if expo > 0:
        m = max(2, int(math.ceil(0.25 * len(r))))
        for k in range(m - 1):
            gain = r[k + 1] ** expo - r[k] ** expo
            c = max(c, (base[k] - base[k + 1]) / gain)
    vals = base + c * r ** expo
    return MonotonicityProfile(
        point=(float(x[0]), float(x[1])), gamma=float(gamma), alpha=alpha, exponent=expo,
        c_fit=float(c), radii=r, energies=G, values=vals, p=p,
        reliable=not violated, hypothesis_met=(1 / pp > math.pi / gamma))


@dataclass
class OmegaBound:
    value: float
    competitors: dict = field(default_factory=dict)


def omega_lower_bound(problem, net: CurveNetwork, x, r: float) -> OmegaBound:
    """Lower bound for the worst normalized local energy over competitors in ``B_r(x)``.

    The family is the network itself, the chord replacement (when the circle
    is crossed exactly twice) and the circle wall; each is solved afresh.
    Disconnected competitors are skipped.
    """
    x = as_point(x)
    if r < 8 * problem.h * (1 - 1e-12):
        raise ValueError("ball under-resolved (need r >= 8h)")
    cands = {"identity": net}
    try:
        if geo.branch_count(net, x, r) == 2:
            cands["chord"] = surgery.chord_replacement(net, x, r)
    except geo.DegenerateCrossing:
        pass
    cands["circle_wall"] = surgery.circle_wall(net, problem.domain, x, r, problem.h)
    out = {}
    for name, cand in cands.items():
        if cand is None or not geo.is_connected(cand):
            continue
        u = problem.solve(cand)
        out[name] = local_energy(u, problem.grid, x, r) / r
    return OmegaBound(max(out.values()), out)


# ---------------------------------------------------------------------------
# Cracktip


def cracktip_value(pts, tip, direction: float) -> np.ndarray:
    """``sqrt(ρ/2π) cos(θ/2)`` with the cut along ``direction`` (radians)."""
    pts = np.atleast_2d(pts)
    tip = as_point(tip)
    d = pts - tip
    rho = np.hypot(d[:, 0], d[:, 1])
    theta = np.arctan2(d[:, 1], d[:, 0]) - (direction + math.pi)
    theta = (theta + math.pi) % (2 * math.pi) - math.pi
    return np.sqrt(rho / (2 * math.pi)) * np.cos(theta / 2)


def cracktip_field(grid: Grid, tip, direction: float) -> ScalarField:
    vals = cracktip_value(grid.points, tip, direction).reshape(grid.shape)
    return ScalarField(grid, np.where(grid.inside, vals, 0.0))


# ---------------------------------------------------------------------------
# Blow-up classification


@dataclass
class BlowupReport:
    point: tuple[float, float]
    cls: str
    e_x: float
    radii: list
    energy_density: list
    branch_counts: list
    angles: tuple | None = None
    boundary_angle: float | None = None
    beta: float | None = None
    note: str = ""


def _branch_count_retry(net, x, r, tries=8):
    for k in range(tries):
        rr = r * (1 + 1e-6 * k * (-1) ** k)
        try:
            return geo.branch_count(net, x, rr), rr
        except geo.DegenerateCrossing:
            continue
    raise geo.DegenerateCrossing(f"degenerate crossing at every perturbation of r={r}")


def _crossing_angles(net: CurveNetwork, x, r) -> tuple[float, ...]:
    ang = sorted(a % 360.0 for a in np.degrees(geo._circle_hits(net, x, r)))
    if len(ang) < 2:
        return ()
    gaps = np.diff(ang + [ang[0] + 360.0])
    return tuple(float(g) for g in gaps)


def blowup_classify(u: ScalarField, grid: Grid | None, net: CurveNetwork, domain, x,
                    radii: Sequence[float], e_min: float = E_MIN,
                    beta_max: float = BETA_REGULAR) -> BlowupReport:
    """Classify the blow-up type at ``x`` from finite-radius signatures.

    ``e_x`` is the median normalized energy ``G(r)/r`` over the two smallest
    radii.  Branch counts must agree over the given radii; otherwise the point
    is Unclassified and the raw data is returned.
    """
    grid = grid or u.grid
    x = as_point(x)
    rs = sorted((float(r) for r in radii), reverse=True)
    rs = [r for r in rs if r >= 8 * grid.h * (1 - 1e-12)]
    if not rs:
        raise ValueError("no radius at or above 8h")
    dens = [local_energy(u, grid, x, r) / r for r in rs]
    e_x = float(np.median(dens[-2:]))
    counts = [_branch_count_retry(net, x, r)[0] for r in rs]
    report = BlowupReport((float(x[0]), float(x[1])), "Unclassified", e_x, rs, dens, counts)
    near_boundary = domain is not None and float(domain.boundary_distance(x[None])[0]) <= grid.h
    if len(set(counts)) > 1 and not near_boundary:
        report.note = "inconsistent branch counts"
        return report
    c = counts[-1]
    if c == 1 and e_x > e_min:
        report.cls = "Endpoint"
    elif c == 2 and e_x <= e_min:
        report.beta = geo.flatness(net, x, rs[-1])
        if report.beta <= beta_max:
            report.cls = "Regular"
    elif c == 3 and e_x <= e_min:
        report.cls = "Triple"
        report.angles = _crossing_angles(net, x, rs[-1])
    if report.cls == "Unclassified" and near_boundary:
        report.cls = "BoundaryTangent"
        report.boundary_angle = boundary_touch_angle(net, domain, x, near=grid.h)
    return report


def _outgoing(pl: np.ndarray) -> np.ndarray:
    d = pl[1] - pl[0]
    return d / np.hypot(*d)


def triple_angles(net: CurveNetwork, node_index: int) -> tuple[float, float, float]:
    """Angles in degrees between the three outgoing first-segment tangents."""
    dirs = []
    for k, e in enumerate(net.edges):
        pl = net.polyline(k)
        if e.i == node_index:
            dirs.append(_outgoing(pl))
        if e.j == node_index:
            dirs.append(_outgoing(pl[::-1]))
    if len(dirs) != 3:
        raise ValueError(f"node {node_index} has degree {len(dirs)}, expected 3")
    ang = sorted(math.degrees(math.atan2(d[1], d[0])) % 360.0 for d in dirs)
    gaps = [ang[1] - ang[0], ang[2] - ang[1], 360.0 - (ang[2] - ang[0])]
    return tuple(gaps)


def boundary_touch_angle(net: CurveNetwork, domain, x, near: float = 1 / 64) -> float:
    """Acute angle in degrees between the network and ``∂Ω`` at a point near the boundary."""
    x = as_point(x)
    if float(domain.boundary_distance(x[None])[0]) > near:
        raise ValueError("point is not near the boundary")
    segs = net.segments
    if len(segs) == 0:
        raise ValueError("network has no segments")
    k = int(np.argmin(geo.point_segment_distance(x[None], segs)[0]))
    t = segs[k, 1] - segs[k, 0]
    t = t / np.hypot(*t)
    _, tb = domain.nearest_boundary(x)
    c = min(1.0, abs(float(np.dot(t, tb))))
    return math.degrees(math.acos(c))


# ---------------------------------------------------------------------------
# Aggregated report

DUAL_COLUMNS = ("dual_residual", "dual_primal", "dual_dual", "dual_gap")
DIAGNOSTICS_COLUMNS = (
    "probe", "x", "y", "r", "h", "cg_tol", "snap_tol",
    "beta", "density", "energy", "energy_density", "omega_lb",
    "gamma", "profile", "blowup_class",
) + DUAL_COLUMNS


@dataclass
class DiagnosticsReport:
    rows: list
    summary: dict


def _safe(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ValueError, geo.DegenerateCrossing):
        return None


def diagnostics_report(problem, net: CurveNetwork, probes, radii, u: ScalarField | None = None,
                       dual=None, omega: bool = True) -> DiagnosticsReport:
    """Per-(probe, radius) rows and a summary for a solved instance.

    Entries that are undefined at a given probe or radius (for example
    ``omega_lb`` below ``8h``) are left as ``None``.  ``dual`` is an optional
    :class:`~glueopt.dualcheck.DualReport` copied into the reserved columns.
    """
    grid = problem.grid
    h = grid.h
    u = u if u is not None else problem.solve(net)
    radii = sorted(float(r) for r in radii)
    dual_vals = ((dual.divergence_residual, dual.primal, dual.dual, dual.gap)
                 if dual is not None else (None,) * 4)
    rows = []
    densities = []
    classes = []
    for k, x in enumerate(probes):
        x = as_point(x)
        prof = None
        ok_r = [r for r in radii if r >= 4 * h * (1 - 1e-12)
                and r < float(problem.domain.boundary_distance(x[None])[0])]
        if len(ok_r) >= 2:
            prof = _safe(monotonicity_profile, u, grid, net, problem.domain, x, ok_r, problem.p)
        rep = _safe(blowup_classify, u, grid, net, problem.domain, x, radii) if radii else None
        cls = rep.cls if rep is not None else "Unclassified"
        classes.append(cls)
        for r in radii:
            dens = geo.ahlfors_density(net, x, r)
            densities.append(dens)
            G = _safe(local_energy, u, grid, x, r)
            om = _safe(omega_lower_bound, problem, net, x, r) if omega and r >= 8 * h else None
            pv = None
            if prof is not None and r in ok_r:
                pv = float(prof.values[list(prof.radii).index(r)])
            rows.append(dict(zip(DIAGNOSTICS_COLUMNS, (
                k, float(x[0]), float(x[1]), r, h, problem.cg_tol, problem.tol,
                _safe(geo.flatness, net, x, r), dens, G, None if G is None else G / r,
                None if om is None else om.value,
                None if prof is None else prof.gamma, pv, cls) + dual_vals)))
    summary = {
        "h": h, "cg_tol": problem.cg_tol, "snap_tol": problem.tol,
        "probes": len(probes),
        "chord_arc": _safe(geo.chord_arc_constant, net) if len(net.edges) else None,
        "contains_loop": bool(geo.contains_loop(net)),
        "ahlfors_min": min(densities) if densities else None,
        "ahlfors_max": max(densities) if densities else None,
        "blowup_classes": classes,
    }
    if dual is not None:
        summary.update(dict(zip(DUAL_COLUMNS, dual_vals)))
    return DiagnosticsReport(rows, summary)
