"""Descent on compliance plus length over connected polyline networks.

Interior polyline vertices follow the first-order shape gradient
``½[(∂u⁺/∂ν)² - (∂u⁻/∂ν)²] + λκ`` along their normals (``κ`` positive when the
curve turns toward the left normal).  Junctions are balanced toward the
Fermat point of their neighbours, tips move by zeroth-order line search along
their tangent, and a periodic pass tries loop cuts, chord shortcuts and
circle walls.  Every accepted state strictly lowers the functional.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import geometry as geo
from . import surgery
from .geometry import CurveNetwork
from .solver import ScalarField, SolverError, compliance, normal_jump

log = logging.getLogger(__name__)

__all__ = [
    "Schedule",
    "OptimizerState",
    "Rejected",
    "NoMove",
    "ShapeGradient",
    "evaluate_functional",
    "initial_state",
    "shape_gradient",
    "descent_step",
    "tip_step",
    "cut_loop",
    "chord_shortcut",
    "circle_wall",
    "run_optimize",
    "save_trajectory",
    "stationarity_residual",
]


@dataclass(frozen=True)
class Schedule:
    max_iter: int = 120
    step: float = 2 / 64
    shrink: float = 0.5
    grow: float = 1.2
    period: int = 10
    threshold: float = 1e-6
    seed: int = 0
    spacing_h: float = 3.0      # polyline vertex spacing, in grid steps
    max_backtracks: int = 5
    tip_step_h: float = 2.0
    cut_radii_h: tuple = (2.0, 4.0, 8.0, 16.0)
    probe_radii_h: tuple = (4.0, 8.0)

    def __post_init__(self):
        for name in ("max_iter", "step", "period", "threshold", "spacing_h", "tip_step_h"):
            if not getattr(self, name) > 0:
                raise ValueError(f"schedule {name} must be positive")
        if not (0 < self.shrink < 1 < self.grow):
            raise ValueError("schedule needs 0 < shrink < 1 < grow")
        if self.max_backtracks < 0:
            raise ValueError("schedule max_backtracks must be nonnegative")


@dataclass
class OptimizerState:
    network: CurveNetwork
    F: float
    compliance: float
    length: float
    solution: ScalarField | None = field(default=None, repr=False)
    iteration: int = 0
    log: list = field(default_factory=list, repr=False)

    def record(self, move: str, step: float = float("nan"), residual: float = float("nan")):
        self.log.append({
            "iteration": self.iteration, "move": move, "F": self.F,
            "compliance": self.compliance, "length": self.length,
            "step": step, "residual": residual,
        })


class Rejected(NamedTuple):
    reason: str
    dF: float = 0.0


class NoMove(NamedTuple):
    reason: str


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("GLUEOPT_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    items = list(items)
    n = _workers()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# Functional


def _check_admissible(problem, net: CurveNetwork):
    if not geo.is_connected(net):
        raise ValueError("network is not connected")
    if len(net.vertices) and not np.all(problem.domain.contains(net.vertices, closed=True)):
        raise ValueError("network leaves the closed domain")


def _evaluate(problem, net: CurveNetwork):
    _check_admissible(problem, net)
    u = problem.solve(net if len(net.edges) else None)
    C = compliance(u, problem.source, problem.grid)
    L = geo.total_length(net)
    return C + problem.lam * L, C, L, u


def evaluate_functional(problem, net: CurveNetwork) -> tuple[float, float, float]:
    """``(F, compliance, length)`` from a fresh solve."""
    F, C, L, _ = _evaluate(problem, net)
    return F, C, L


def initial_state(problem, net: CurveNetwork, spacing: float | None = None) -> OptimizerState:
    if spacing is not None and len(net.edges):
        net = surgery.resample(net, spacing)
    F, C, L, u = _evaluate(problem, net)
    st = OptimizerState(net, F, C, L, u, 0, [])
    st.record("init")
    return st


def _state_from(problem, parent: OptimizerState, net: CurveNetwork, spacing: float | None = None):
    if spacing is not None and len(net.edges):
        net = _remesh(net, spacing)
    try:
        F, C, L, u = _evaluate(problem, net)
    except (ValueError, SolverError) as exc:
        return None, str(exc)
    return OptimizerState(net, F, C, L, u, parent.iteration, parent.log), ""


# ---------------------------------------------------------------------------
# Shape gradient


@dataclass
class ShapeGradient:
    """Normal velocities on interior polyline vertices, edge by edge.

    Positive velocity along ``normals`` decreases the functional to first
    order.  Nodes (tips, junctions) carry no velocity here.
    """

    velocity: list       # per edge, (m,) for the m interior vertices
    normals: list        # per edge, (m, 2)
    jump_term: list
    curvature_term: list
    valid: list          # per edge, (m,) bool: at least one jump sample was used
    flagged: int = 0     # skipped jump samples

    @property
    def max_abs(self) -> float:
        vals = [np.abs(v[ok]) for v, ok in zip(self.velocity, self.valid) if len(v)]
        vals = [v for v in vals if len(v)]
        return float(max(v.max() for v in vals)) if vals else 0.0


def shape_gradient(problem, state: OptimizerState) -> ShapeGradient:
    net = state.network
    u = state.solution
    grid = problem.grid
    vel, nrm, jt, ct, val = [], [], [], [], []
    flagged = 0
    seg_base = 0
    for k, e in enumerate(net.edges):
        pl = net.polyline(k)
        nseg = len(pl) - 1
        d = np.diff(pl, axis=0)
        ln = np.hypot(*d.T)
        tan = d / ln[:, None]
        left = np.column_stack([-tan[:, 1], tan[:, 0]])
        m = nseg - 1
        num = np.zeros(max(m, 0))
        den = np.zeros(max(m, 0))
        for s in range(nseg):
            js = normal_jump(u, grid, net, seg_base + s)
            n = len(js.jump)
            t = (np.arange(n) + 0.5) / n
            flagged += int(np.count_nonzero(~js.valid))
            w_ok = js.valid.astype(float)
            if s - 1 >= 0:            # hat of vertex s (left end of segment s)
                num[s - 1] += np.sum((1 - t) * js.jump * w_ok) * ln[s] / n
                den[s - 1] += np.sum((1 - t) * w_ok) * ln[s] / n
            if s < m:                 # hat of vertex s+1 (right end)
                num[s] += np.sum(t * js.jump * w_ok) * ln[s] / n
                den[s] += np.sum(t * w_ok) * ln[s] / n
        seg_base += nseg
        ok = den > 0
        jump = np.where(ok, num / np.where(ok, den, 1.0), 0.0)
        if m > 0:
            cross = tan[:-1, 0] * tan[1:, 1] - tan[:-1, 1] * tan[1:, 0]
            dot = np.einsum("ij,ij->i", tan[:-1], tan[1:])
            turn = np.arctan2(cross, dot)
            kappa = turn / (0.5 * (ln[:-1] + ln[1:]))
            nv = left[:-1] + left[1:]
            nn = np.hypot(*nv.T)
            nv = np.where(nn[:, None] > 1e-9, nv / np.maximum(nn, 1e-300)[:, None], left[1:])
        else:
            kappa = np.zeros(0)
            nv = np.zeros((0, 2))
        jterm = 0.5 * jump
        cterm = problem.lam * kappa
        vel.append(jterm + cterm)
        nrm.append(nv)
        jt.append(jterm)
        ct.append(cterm)
        val.append(ok)
    return ShapeGradient(vel, nrm, jt, ct, val, flagged)


# ---------------------------------------------------------------------------
# Moves


def _spacing(problem, schedule: Schedule | None) -> float:
    return (schedule.spacing_h if schedule else Schedule.spacing_h) * problem.h


def _fit_domain(problem, net: CurveNetwork):
    dom = problem.domain
    if np.all(dom.contains(net.vertices, closed=True)):
        return net
    if not dom.convex:
        return None
    return geo.project_to_domain(net, dom)


def _remesh(net: CurveNetwork, spacing: float) -> CurveNetwork:
    """Split long segments exactly and drop vertices beside very short ones.

    Splitting leaves the geometry unchanged; a vertex is dropped only when an
    adjacent segment is shorter than half of ``spacing``, so the change
    is second order and step-independent drift is avoided.
    """
    edges = []
    changed = False
    for k, e in enumerate(net.edges):
        pl = net.polyline(k)
        keep = [pl[0]]
        for q in range(1, len(pl) - 1):
            if np.hypot(*(pl[q] - keep[-1])) < 0.5 * spacing or \
               np.hypot(*(pl[q + 1] - pl[q])) < 0.5 * spacing:
                if len(pl) - 2 > (1 if e.i == e.j else 0):
                    changed = True
                    continue
            keep.append(pl[q])
        keep.append(pl[-1])
        out = [keep[0]]
        for a_, b_ in zip(keep[:-1], keep[1:]):
            n = int(np.hypot(*(b_ - a_)) // (1.6 * spacing)) + 1
            if n > 1:
                changed = True
                t = np.arange(1, n)[:, None] / n
                out.extend(a_ + t * (b_ - a_))
            out.append(b_)
        edges.append((e.i, e.j, np.array(out[1:-1]).reshape(-1, 2)))
    return CurveNetwork(net.nodes, edges) if changed else net


def _junction_targets(net: CurveNetwork):
    """One Weiszfeld iteration toward the Fermat point of each degree-3 node's neighbours."""
    deg = net.degree()
    out = {}
    for nd in np.flatnonzero(deg == 3):
        nbrs = []
        for k, e in enumerate(net.edges):
            pl = net.polyline(k)
            if e.i == nd:
                nbrs.append(pl[1])
            if e.j == nd:
                nbrs.append(pl[-2])
        p = net.nodes[nd]
        d = np.array([np.hypot(*(q - p)) for q in nbrs])
        if np.any(d < 1e-12):
            continue
        w = 1.0 / d
        target = (np.array(nbrs) * w[:, None]).sum(axis=0) / w.sum()
        out[int(nd)] = target
    return out


def descent_step(problem, state: OptimizerState, step: float, grad: ShapeGradient | None = None,
                 schedule: Schedule | None = None):
    """Move interior vertices by ``step`` times the normalized velocity.

    The largest vertex displacement equals ``step``; junctions move toward
    their Fermat target by at most ``step``.  Returns the new state when the
    functional strictly decreases, otherwise :class:`Rejected`.
    """
    net = state.network
    grad = grad or shape_gradient(problem, state)
    vmax = grad.max_abs
    targets = _junction_targets(net)
    jmoves = {nd: t - net.nodes[nd] for nd, t in targets.items()
              if np.hypot(*(t - net.nodes[nd])) > 1e-12}
    if vmax == 0.0 and not jmoves:
        return Rejected("zero gradient", 0.0)
    nodes = np.array(net.nodes)
    for nd, dv in jmoves.items():
        n = np.hypot(*dv)
        nodes[nd] += dv * min(1.0, step / n)
    deg = net.degree()
    edges = []
    for k, e in enumerate(net.edges):
        v = grad.velocity[k]
        if len(v) and vmax > 0:
            disp = (step * v / vmax)[:, None] * grad.normals[k]
            edges.append((e.i, e.j, np.array(e.interior) + disp))
            # tips ride along with their neighbouring vertex
            if deg[e.i] == 1 and e.i != e.j:
                nodes[e.i] += disp[0]
            if deg[e.j] == 1 and e.i != e.j:
                nodes[e.j] += disp[-1]
        else:
            edges.append((e.i, e.j, np.array(e.interior)))
    try:
        cand = CurveNetwork(nodes, edges, check=False).cleaned()
    except ValueError as exc:
        return Rejected(f"invalid geometry: {exc}")
    cand = _fit_domain(problem, cand)
    if cand is None:
        return Rejected("left the domain")
    cand = _remesh(cand, _spacing(problem, schedule))
    if not geo.is_embedded(cand):
        return Rejected("self-intersection")
    new, why = _state_from(problem, state, cand)
    if new is None:
        return Rejected(why)
    dF = new.F - state.F
    if dF < 0:
        return new
    return Rejected("no decrease", dF)


def _tip_variants(net: CurveNetwork, node: int, delta: float):
    """(retracted, extended) networks for a degree-one node."""
    k = next(k for k, e in enumerate(net.edges) if e.i == node or e.j == node)
    e = net.edges[k]
    pl = net.polyline(k)
    if e.i != node:
        pl = pl[::-1]
    polys = [p for q, p in enumerate(net.polylines()) if q != k]
    seg = np.hypot(*np.diff(pl, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    out = []
    if delta < cum[-1] - 1e-9:
        idx = int(np.searchsorted(cum, delta, side="right") - 1)
        t = (delta - cum[idx]) / seg[idx]
        cut = pl[idx] + t * (pl[idx + 1] - pl[idx])
        rest = np.vstack([cut[None], pl[idx + 1:]])
        out.append(surgery.from_pieces(polys + [rest]))
    elif polys:
        out.append(surgery.from_pieces(polys))
    else:
        out.append(None)
    tan = (pl[0] - pl[1]) / seg[0]
    ext = pl.copy()
    ext[0] = pl[0] + delta * tan
    out.append(surgery.from_pieces(polys + [ext]))
    return out


def tip_step(problem, state: OptimizerState, delta: float, spacing: float | None = None):
    """Zeroth-order tip line search: retract or extend each tip by ``delta``.

    Tips are tried in node order and improvements applied one after the
    other.  Returns the improved state or :class:`NoMove`.
    """
    cur = state
    moved = False
    done: set[tuple] = set()
    while True:
        net = cur.network
        tips = [int(n) for n in np.flatnonzero(net.degree() == 1)]
        tips = [n for n in tips if tuple(np.round(net.nodes[n], 12)) not in done]
        if not tips:
            break
        n = tips[0]
        done.add(tuple(np.round(net.nodes[n], 12)))
        best = None
        for cand in _tip_variants(net, n, delta):
            if cand is None or len(cand.edges) == 0:
                continue
            if not np.all(problem.domain.contains(cand.vertices, closed=True)):
                continue
            if not geo.is_embedded(cand):
                continue
            new, _ = _state_from(problem, cur, cand, spacing or _spacing(problem, None))
            if new is None or new.F >= cur.F:
                continue
            if best is None or new.F < best.F or (new.F == best.F and new.length < best.length):
                best = new
        if best is not None:
            for q in np.flatnonzero(best.network.degree() == 1):
                done.add(tuple(np.round(best.network.nodes[q], 12)))
            cur = best
            moved = True
    return cur if moved else NoMove("no tip improvement")


def _cycle_edges(net: CurveNetwork) -> list[int]:
    out = []
    for k, e in enumerate(net.edges):
        if e.i == e.j:
            out.append(k)
            continue
        rest = CurveNetwork(net.nodes, [x for q, x in enumerate(net.edges) if q != k])
        _, lab = geo._node_components(rest)
        if lab[e.i] == lab[e.j]:
            out.append(k)
    return out


def cut_loop(problem, state: OptimizerState, r_cuts=None, angle_samples: int = 64,
             spacing: float | None = None):
    """Open a loop at its flattest vertex.

    For each cut diameter, the cycle vertex with the smallest flatness at
    that radius is located and the piece of its edge inside the ball of that
    diameter removed.  The best strictly decreasing cut is accepted.
    """
    net = state.network
    if not geo.contains_loop(net):
        return NoMove("loop-free")
    if r_cuts is None:
        r_cuts = [c * problem.h for c in Schedule.cut_radii_h]
    cyc = _cycle_edges(net)
    cands = []
    for r in r_cuts:
        best = None
        for k in cyc:
            pl = net.polyline(k)
            for v in pl[1:-1] if len(pl) > 2 else pl:
                try:
                    b = geo.flatness(net, v, r, angle_samples, refine=False)
                except ValueError:
                    continue
                if best is None or b < best[0]:
                    best = (b, k, v)
        if best is None:
            continue
        cand = surgery.remove_subarc(net, best[1], best[2], r / 2)
        if geo.is_connected(cand) and len(cand.edges):
            cands.append((r, cand))
    sp = spacing or _spacing(problem, None)
    results = _pmap(lambda rc: _state_from(problem, state, rc[1], sp)[0], cands)
    best = None
    for (r, _), new in zip(cands, results):
        if new is None or new.F >= state.F:
            continue
        if best is None or new.F < best[1].F or (new.F == best[1].F and new.length < best[1].length):
            best = (r, new)
    if best is None:
        return NoMove("no decreasing cut")
    return best[1]


def chord_shortcut(problem, state: OptimizerState, x, r: float, min_gain: float = 0.0,
                   spacing: float | None = None):
    """Replace the network inside ``B_r(x)`` by the chord of its two crossings."""
    net = state.network
    try:
        bc = geo.branch_count(net, x, r)
    except geo.DegenerateCrossing:
        return NoMove("degenerate crossing")
    if bc != 2:
        return NoMove(f"branch count {bc}")
    cand = surgery.chord_replacement(net, x, r)
    if cand is None or not geo.is_connected(cand):
        return NoMove("chord disconnects")
    gain = state.length - geo.total_length(cand)
    if problem.lam * gain <= max(min_gain, 1e-12 * max(1.0, state.length)):
        return NoMove("already straight")
    if not geo.is_embedded(cand):
        return NoMove("self-intersection")
    new, _ = _state_from(problem, state, cand, spacing or _spacing(problem, None))
    if new is None or new.F >= state.F:
        return NoMove("no decrease")
    return new


def circle_wall(problem, state: OptimizerState, x, r: float, step: float | None = None,
                spacing: float | None = None):
    """Replace the network inside ``B_r(x)`` by the circle ``∂B_r(x) ∩ closed Ω``."""
    net = state.network
    x = geo.as_point(x)
    if geo.ahlfors_density(net, x, r) == 0.0:
        return NoMove("empty ball")
    cand = surgery.circle_wall(net, problem.domain, x, r, step or problem.h)
    if not len(cand.edges) or not geo.is_connected(cand):
        return NoMove("wall disconnects")
    if problem.lam * geo.total_length(cand) >= state.F:
        return NoMove("length alone exceeds current value")
    if not geo.is_embedded(cand):
        return NoMove("self-intersection")
    new, _ = _state_from(problem, state, cand, spacing or _spacing(problem, None))
    if new is None or new.F >= state.F:
        return NoMove("no decrease")
    return new


# ---------------------------------------------------------------------------
# Driver


def _probes(net: CurveNetwork, h: float, rng) -> np.ndarray:
    L = geo.total_length(net)
    if L == 0:
        return np.zeros((0, 2))
    spacing = max(4 * h, L / 64)
    pts = []
    offset = rng.uniform(0, spacing)
    for pl in net.polylines():
        seg = np.hypot(*np.diff(pl, axis=0).T)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        s = np.arange(offset % spacing, cum[-1], spacing)
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
        t = (s - cum[idx]) / seg[idx]
        pts.append(pl[idx] + t[:, None] * (pl[idx + 1] - pl[idx]))
    return np.vstack(pts) if pts else np.zeros((0, 2))


def _topology_pass(problem, state: OptimizerState, schedule: Schedule, rng):
    h = problem.h
    sp = _spacing(problem, schedule)
    cur = state
    res = cut_loop(problem, cur, [c * h for c in schedule.cut_radii_h], spacing=sp)
    if isinstance(res, OptimizerState):
        cur = res
        cur.record("cut_loop")
    for r in (c * h for c in schedule.probe_radii_h):
        for x in _probes(cur.network, h, rng):
            res = chord_shortcut(problem, cur, x, r, min_gain=schedule.threshold, spacing=sp)
            if isinstance(res, OptimizerState):
                cur = res
                cur.record("chord_shortcut")
    for r in (c * h for c in schedule.probe_radii_h):
        for x in _probes(cur.network, h, rng):
            # only dense spots can pay for a wall
            if len(cur.network.edges) == 0 or geo.ahlfors_density(cur.network, x, r) < math.pi:
                continue
            res = circle_wall(problem, cur, x, r, spacing=sp)
            if isinstance(res, OptimizerState):
                cur = res
                cur.record("circle_wall")
    return cur


def run_optimize(problem, init: CurveNetwork, schedule: Schedule | None = None,
                 callback=None) -> list[OptimizerState]:
    """Alternate descent, tip and periodic topology moves until stationary.

    Returns the trajectory of accepted states (the first entry is the
    initial state).  Stops when the functional changes by less than
    ``schedule.threshold`` over a full period, or at ``schedule.max_iter``.
    On an exception the partial trajectory is attached as ``exc.trajectory``.
    """
    schedule = schedule or Schedule()
    rng = np.random.default_rng(schedule.seed)
    spacing = _spacing(problem, schedule)
    state = initial_state(problem, init, spacing)
    traj = [state]
    if len(state.network.edges) == 0:
        return traj
    step = schedule.step
    tip_delta = schedule.tip_step_h * problem.h
    period_start_F = state.F
    try:
        for it in range(schedule.max_iter):
            state.iteration = it
            if it % schedule.period == 0:
                new = _topology_pass(problem, state, schedule, rng)
                if new is not state:
                    state = new
                    traj.append(state)
            if len(state.network.edges) == 0:
                break
            grad = shape_gradient(problem, state)
            resid = grad.max_abs
            accepted = False
            for _ in range(schedule.max_backtracks + 1):
                res = descent_step(problem, state, step, grad, schedule)
                if isinstance(res, OptimizerState):
                    state = res
                    state.iteration = it
                    state.record("descent", step, resid)
                    traj.append(state)
                    step = min(step * schedule.grow, spacing / 2)
                    accepted = True
                    break
                if res.reason == "zero gradient":
                    break
                step *= schedule.shrink
            if not accepted:
                step = max(step, 1e-3 * problem.h)
            res = tip_step(problem, state, tip_delta, spacing)
            if isinstance(res, OptimizerState):
                state = res
                state.iteration = it
                state.record("tip", tip_delta, resid)
                traj.append(state)
                tip_delta = min(tip_delta * schedule.grow, 8 * problem.h)
            else:
                tip_delta = max(tip_delta * schedule.shrink, 0.25 * problem.h)
            if callback is not None:
                callback(state)
            if (it + 1) % schedule.period == 0:
                if abs(period_start_F - state.F) < schedule.threshold:
                    log.info("converged at iteration %d, F=%.8g", it, state.F)
                    break
                period_start_F = state.F
    except Exception as exc:
        exc.trajectory = traj
        raise
    return traj


def stationarity_residual(problem, state: OptimizerState) -> float:
    return shape_gradient(problem, state).max_abs


def save_trajectory(traj: list[OptimizerState], outdir) -> None:
    """One network file per accepted state plus ``log.csv``."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for k, st in enumerate(traj):
        geo.write_network(st.network, out / f"state_{k:04d}.net")
    rows = traj[-1].log if traj else []
    with open(out / "log.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["iteration", "move", "F", "compliance", "length",
                                           "step", "residual"], lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
