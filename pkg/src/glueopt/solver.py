"""Finite-difference membrane solver with Dirichlet conditions on a curve network.

The domain is covered by a uniform node grid.  Nodes outside the domain or
within ``tol`` of the network are constrained to zero; the remaining nodes
carry the 5-point Laplacian.  An edge joining a free node to a constrained
one is weighted by ``1/theta``, where ``theta*h`` is the distance along the
edge to the actual boundary crossing (symmetric ghost-fluid correction).
An edge between two free nodes that crosses the network is cut: the
coupling is dropped and each end gets its own ``1/theta`` term toward the
crossing.  Edges without a crossing keep weight 1, so the scheme degrades
gracefully to plain node snapping.

Array layout: ``values[j, i]`` sits at ``(x0 + i*h, y0 + j*h)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from .geometry import CurveNetwork, as_point

__all__ = [
    "Grid",
    "DirichletMask",
    "ScalarField",
    "ConstantSource",
    "GaussianSource",
    "GridFileSource",
    "SolverError",
    "make_grid",
    "rasterize_dirichlet",
    "solve_membrane",
    "compliance",
    "energy_value",
    "dirichlet_energy",
    "local_energy",
    "normal_jump",
    "read_grid_values",
    "write_field",
]

THETA_MIN = 1e-2
# reach of the ghost correction past a constrained node, in edge lengths
GHOST_REACH = 1.5


class SolverError(RuntimeError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


# ---------------------------------------------------------------------------
# Grid


@dataclass(frozen=True, eq=False)
class Grid:
    origin: tuple[float, float]
    h: float
    nx: int
    ny: int
    domain: object = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid needs at least 3 nodes per direction")
        if max(self.nx, self.ny) > 8193:
            raise ValueError("grid too large")

    @property
    def shape(self):
        return (self.ny, self.nx)

    @cached_property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    @cached_property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)

    @cached_property
    def XY(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ys)

    @cached_property
    def points(self) -> np.ndarray:
        X, Y = self.XY
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def inside(self) -> np.ndarray:
        """Nodes strictly inside the domain."""
        if self.domain is None:
            m = np.zeros(self.shape, dtype=bool)
            m[1:-1, 1:-1] = True
            return m
        return self.domain.contains(self.points).reshape(self.shape)

    def index_of(self, p) -> tuple[float, float]:
        """Fractional (i, j) grid coordinates of a point."""
        p = as_point(p)
        return ((p[0] - self.origin[0]) / self.h, (p[1] - self.origin[1]) / self.h)

    def bilinear(self, values: np.ndarray, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        fi = (pts[:, 0] - self.origin[0]) / self.h
        fj = (pts[:, 1] - self.origin[1]) / self.h
        i0 = np.clip(np.floor(fi).astype(int), 0, self.nx - 2)
        j0 = np.clip(np.floor(fj).astype(int), 0, self.ny - 2)
        tx = fi - i0
        ty = fj - j0
        v = values
        return ((1 - tx) * (1 - ty) * v[j0, i0] + tx * (1 - ty) * v[j0, i0 + 1]
                + (1 - tx) * ty * v[j0 + 1, i0] + tx * ty * v[j0 + 1, i0 + 1])


def make_grid(domain, h: float, pad: int = 1) -> Grid:
    """Uniform grid covering the domain's bounding box plus ``pad`` node layers."""
    x0, y0, x1, y1 = domain.bbox
    nx = int(math.ceil((x1 - x0) / h - 1e-9)) + 1 + 2 * pad
    ny = int(math.ceil((y1 - y0) / h - 1e-9)) + 1 + 2 * pad
    return Grid((float(x0 - pad * h), float(y0 - pad * h)), float(h), nx, ny, domain)


# ---------------------------------------------------------------------------
# Dirichlet constraints


@dataclass(frozen=True, eq=False)
class DirichletMask:
    """Constrained nodes plus the edge weights of the ghost correction.

    ``wx[j, i]`` weights the edge between nodes ``(j, i)`` and ``(j, i+1)``;
    ``wy[j, i]`` the edge between ``(j, i)`` and ``(j+1, i)``.  ``dg`` holds the
    node-to-curve conductances of cut edges (zero coupling in ``wx``/``wy``).
    """

    constrained: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    dg: np.ndarray | None = None

    @property
    def sink(self) -> np.ndarray:
        return self.dg if self.dg is not None else np.zeros(self.constrained.shape)

    @property
    def free(self) -> np.ndarray:
        return ~self.constrained


def _segment_node_distance_mask(segs, grid: Grid, tol: float) -> np.ndarray:
    hit = np.zeros(grid.shape, dtype=bool)
    x0, y0 = grid.origin
    h = grid.h
    tol_eff = tol * (1 + 1e-12) + 1e-15
    for a, b in segs:
        lo = np.minimum(a, b) - tol_eff
        hi = np.maximum(a, b) + tol_eff
        i0 = max(int(math.ceil((lo[0] - x0) / h - 1e-12)), 0)
        i1 = min(int(math.floor((hi[0] - x0) / h + 1e-12)), grid.nx - 1)
        j0 = max(int(math.ceil((lo[1] - y0) / h - 1e-12)), 0)
        j1 = min(int(math.floor((hi[1] - y0) / h + 1e-12)), grid.ny - 1)
        if i1 < i0 or j1 < j0:
            continue
        X, Y = np.meshgrid(grid.xs[i0:i1 + 1], grid.ys[j0:j1 + 1])
        d = b - a
        dd = float(np.dot(d, d))
        t = np.clip(((X - a[0]) * d[0] + (Y - a[1]) * d[1]) / dd, 0.0, 1.0)
        dist = np.hypot(X - a[0] - t * d[0], Y - a[1] - t * d[1])
        hit[j0:j1 + 1, i0:i1 + 1] |= dist <= tol_eff
    return hit


def _ray_network_param(A, B, segs) -> np.ndarray:
    """First crossing parameter of each ray ``A -> B`` with the segments (inf if none)."""
    t = np.full(len(A), np.inf)
    if len(A) == 0:
        return t
    r = B - A
    lo = np.minimum(A, B)
    hi = np.maximum(A, B)
    for a, b in segs:
        slo = np.minimum(a, b)
        shi = np.maximum(a, b)
        near = np.all(lo <= shi + 1e-12, axis=1) & np.all(hi >= slo - 1e-12, axis=1)
        if not np.any(near):
            continue
        idx = np.flatnonzero(near)
        rr = r[idx]
        w = b - a
        den = rr[:, 0] * w[1] - rr[:, 1] * w[0]
        qp = a - A[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = (qp[:, 0] * w[1] - qp[:, 1] * w[0]) / den
            ss = (qp[:, 0] * rr[:, 1] - qp[:, 1] * rr[:, 0]) / den
        ok = (np.abs(den) > 1e-14) & (tt >= 0) & (tt <= 1) & (ss >= 0) & (ss <= 1)
        t[idx] = np.minimum(t[idx], np.where(ok, tt, np.inf))
    return t


def _theta(t):
    return np.clip(np.where(np.isfinite(t), t, 1.0), THETA_MIN, GHOST_REACH)


def _tip_ramps(grid: Grid, tips):
    """Cut fractions of grid edges near each tip, ramped over ``±h/2`` along the tip line.

    ``tips`` holds ``(T, e)`` pairs: tip point and outward unit tangent.
    Returns ``{(axis, j, i): (beta, ta, tb)}`` with the distances from the
    lower and upper node to the tip region in units of ``h``.  The nearest
    tip wins.
    """
    h = grid.h
    x0, y0 = grid.origin
    out: dict = {}
    best: dict = {}
    for T, e in tips:
        nrm = np.array([-e[1], e[0]])
        i0 = max(int(math.floor((T[0] - x0) / h)) - 2, 0)
        i1 = min(int(math.floor((T[0] - x0) / h)) + 3, grid.nx - 1)
        j0 = max(int(math.floor((T[1] - y0) / h)) - 2, 0)
        j1 = min(int(math.floor((T[1] - y0) / h)) + 3, grid.ny - 1)
        for axis, (di, dj) in ((0, (1, 0)), (1, (0, 1))):
            for j in range(j0, j1 + 1 - dj):
                for i in range(i0, i1 + 1 - di):
                    A = np.array([x0 + i * h, y0 + j * h])
                    B = A + h * np.array([di, dj])
                    an = float(np.dot(A - T, nrm))
                    bn = float(np.dot(B - T, nrm))
                    if an * bn > 0 or an == bn:
                        continue
                    t = an / (an - bn)
                    q = float(np.dot(A + t * (B - A) - T, e))
                    if abs(q) > h / 2:
                        continue
                    key = (axis, j, i)
                    dist = math.hypot(q, 0.0)
                    if key in best and best[key] <= dist:
                        continue
                    best[key] = dist
                    over = max(q, 0.0) / h
                    out[key] = (0.5 - q / h, math.hypot(t, over), math.hypot(1.0 - t, over))
    return out


def _edge_weights(constrained, grid: Grid, segs, ghost: bool, tips=()):
    wx = np.ones((grid.ny, grid.nx - 1))
    wy = np.ones((grid.ny - 1, grid.nx))
    dg = np.zeros(grid.shape)
    if not ghost:
        return wx, wy, dg
    X, Y = grid.XY
    P = np.stack([X, Y], axis=-1)
    domain = grid.domain
    ramps = _tip_ramps(grid, tips) if len(tips) else {}
    for axis, (w, sl_a, sl_b) in enumerate((
        (wx, np.s_[:, :-1], np.s_[:, 1:]),
        (wy, np.s_[:-1, :], np.s_[1:, :]),
    )):
        for src, dst in ((sl_a, sl_b), (sl_b, sl_a)):
            sel = ~constrained[src] & constrained[dst]
            if not np.any(sel):
                continue
            A = P[src][sel]
            B = P[dst][sel]
            far = A + GHOST_REACH * (B - A)
            t = _ray_network_param(A, far, segs)
            if domain is not None:
                t = np.minimum(t, domain.cut_fraction(A, far))
            w[sel] = 1.0 / _theta(GHOST_REACH * t)
        sel = ~constrained[sl_a] & ~constrained[sl_b]
        if not (len(segs) and np.any(sel)):
            continue
        beta = np.zeros(sel.shape)
        ta = np.full(sel.shape, np.inf)
        tb = np.full(sel.shape, np.inf)
        A = P[sl_a][sel]
        B = P[sl_b][sel]
        ta_s = _ray_network_param(A, B, segs)
        cut = np.isfinite(ta_s)
        if np.any(cut):
            ia = np.argwhere(sel)[cut]
            ta[ia[:, 0], ia[:, 1]] = ta_s[cut]
            tb[ia[:, 0], ia[:, 1]] = _ray_network_param(B[cut], A[cut], segs)
            beta[ia[:, 0], ia[:, 1]] = 1.0
        for (ax, j, i), (bt, t_a, t_b) in ramps.items():
            if ax != axis or not sel[j, i]:
                continue
            if beta[j, i] == 1.0 and not (abs(ta[j, i] - t_a) < 1e-9 or abs(tb[j, i] - t_b) < 1e-9):
                continue        # cut elsewhere by another part of the network
            beta[j, i] = min(max(bt, 0.0), 1.0)
            ta[j, i] = t_a
            tb[j, i] = t_b
        on = beta > 0
        if not np.any(on):
            continue
        w[on] *= 1.0 - beta[on]
        ga = np.where(on, beta / _theta(ta), 0.0)
        gb = np.where(on, beta / _theta(tb), 0.0)
        dg[sl_a] += ga
        dg[sl_b] += gb
    return wx, wy, dg


def network_tips(net: CurveNetwork | None):
    """``(point, outward unit tangent)`` for every degree-one node."""
    if net is None or len(net.edges) == 0:
        return []
    deg = net.degree()
    out = []
    for k, e in enumerate(net.edges):
        pl = net.polyline(k)
        for node, p, q in ((e.i, pl[0], pl[1]), (e.j, pl[-1], pl[-2])):
            if deg[node] == 1 and e.i != e.j:
                d = p - q
                n = math.hypot(*d)
                if n > 0:
                    out.append((np.array(p), d / n))
    return out


def rasterize_dirichlet(net: CurveNetwork | None, grid: Grid, tol: float | None = None,
                        ghost: bool = True) -> DirichletMask:
    """Constrain nodes outside the domain, on its boundary, or within ``tol`` of the network.

    ``tol`` defaults to ``h/2``.  Isolated nodes of the network carry no
    capacity and constrain nothing.  With ``ghost`` the edge weights encode
    the sub-cell position of the boundary; the boolean mask is the same
    either way.
    """
    if tol is None:
        tol = grid.h / 2
    constrained = ~grid.inside
    segs = net.segments if net is not None else np.zeros((0, 2, 2))
    if len(segs):
        constrained = constrained | _segment_node_distance_mask(segs, grid, tol)
    wx, wy, dg = _edge_weights(constrained, grid, segs, ghost, network_tips(net))
    return DirichletMask(constrained, wx, wy, dg)


# ---------------------------------------------------------------------------
# Sources


@dataclass(frozen=True)
class ConstantSource:
    c: float = 1.0
    p: float = math.inf

    def __post_init__(self):
        _check_p(self.p)

    def sample(self, grid: Grid) -> np.ndarray:
        return np.full(grid.shape, float(self.c))


@dataclass(frozen=True)
class GaussianSource:
    """Sum of bumps ``amplitude * exp(-|x - center|^2 / (2 width^2))``."""

    bumps: tuple = ()
    p: float = math.inf

    def __post_init__(self):
        _check_p(self.p)
        for center, amp, width in self.bumps:
            if not width > 0:
                raise ValueError("bump width must be positive")

    def sample(self, grid: Grid) -> np.ndarray:
        X, Y = grid.XY
        out = np.zeros(grid.shape)
        for (cx, cy), amp, width in self.bumps:
            out += amp * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * width ** 2))
        return out


@dataclass(frozen=True)
class GridFileSource:
    """Source sampled on its own grid, bilinearly resampled (zero outside it)."""

    path: str
    p: float = math.inf
    data: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        _check_p(self.p)
        if self.data is None:
            object.__setattr__(self, "data", read_grid_values(self.path))

    def sample(self, grid: Grid) -> np.ndarray:
        (nx, ny, x0, y0, h), vals = self.data
        interp = RegularGridInterpolator(
            (y0 + h * np.arange(ny), x0 + h * np.arange(nx)), vals,
            bounds_error=False, fill_value=0.0)
        X, Y = grid.XY
        return interp(np.stack([Y.ravel(), X.ravel()], axis=1)).reshape(grid.shape)


def _check_p(p):
    if not p > 2:
        raise ValueError("p must exceed 2")


def source_values(f, grid: Grid) -> np.ndarray:
    vals = f.sample(grid) if hasattr(f, "sample") else np.broadcast_to(np.asarray(f, float), grid.shape)
    vals = np.where(grid.inside, vals, 0.0)
    if not np.all(np.isfinite(vals)):
        raise ValueError("source has non-finite values")
    return vals


# ---------------------------------------------------------------------------
# Fields and the linear solve


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray
    mask: DirichletMask | None = None
    residual: float = 0.0
    iterations: int = 0

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError("field shape does not match grid")

    def at(self, pts) -> np.ndarray:
        return self.grid.bilinear(self.values, pts)


def _weights_of(u: ScalarField):
    if u.mask is not None:
        return u.mask.wx, u.mask.wy
    g = u.grid
    return np.ones((g.ny, g.nx - 1)), np.ones((g.ny - 1, g.nx))


def assemble(mask: DirichletMask):
    """Weighted 5-point operator restricted to the free nodes (unscaled by h^2)."""
    free = mask.free
    ny, nx = free.shape
    idx = -np.ones(free.shape, dtype=np.int64)
    idx[free] = np.arange(np.count_nonzero(free))
    diag = np.zeros(free.shape)
    diag[:, :-1] += mask.wx
    diag[:, 1:] += mask.wx
    diag[:-1, :] += mask.wy
    diag[1:, :] += mask.wy
    diag += mask.sink
    rows, cols, vals = [idx[free]], [idx[free]], [diag[free]]
    for w, a, b in ((mask.wx, idx[:, :-1], idx[:, 1:]), (mask.wy, idx[:-1, :], idx[1:, :])):
        both = (a >= 0) & (b >= 0)
        rows += [a[both], b[both]]
        cols += [b[both], a[both]]
        vals += [-w[both], -w[both]]
    n = int(np.count_nonzero(free))
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return A, diag[free]


def _pcg(A, b, dinv, tol, maxiter):
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return x, 0.0, 0
    z = dinv * r
    p = z.copy()
    rz = float(r @ z)
    res = 1.0
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = float(np.linalg.norm(r)) / bnorm
        if res <= tol:
            return x, res, it
        z = dinv * r
        rz_new = float(r @ z)
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise SolverError("conjugate gradient did not converge", res, maxiter)


def solve_membrane(grid: Grid, mask: DirichletMask, f, cg_tol: float = 1e-10,
                   maxiter: int | None = None) -> ScalarField:
    """Solve ``-Δu = f`` on the free nodes by Jacobi-preconditioned CG.

    Stops at relative residual ``cg_tol``; the iteration cap defaults to
    ``50 * max(nx, ny)``.
    """
    if not cg_tol > 0:
        raise ValueError("cg_tol must be positive")
    free = mask.free
    if not np.any(free):
        raise SolverError("no unconstrained nodes", math.nan, 0)
    fv = source_values(f, grid)
    A, diag = assemble(mask)
    b = fv[free] * grid.h ** 2
    cap = maxiter if maxiter is not None else 50 * max(grid.nx, grid.ny)
    x, res, it = _pcg(A, b, 1.0 / diag, cg_tol, cap)
    u = np.zeros(grid.shape)
    u[free] = x
    return ScalarField(grid, u, mask, res, it)


def compliance(u: ScalarField, f, grid: Grid | None = None) -> float:
    """Midpoint quadrature of ``½∫ f u`` over the inside nodes."""
    grid = grid or u.grid
    fv = source_values(f, grid)
    return 0.5 * float(np.sum(np.where(grid.inside, fv * u.values, 0.0))) * grid.h ** 2


def _edge_energy(u: ScalarField):
    wx, wy = _weights_of(u)
    v = u.values
    return wx * np.diff(v, axis=1) ** 2, wy * np.diff(v, axis=0) ** 2


def _sink_energy(u: ScalarField) -> np.ndarray:
    if u.mask is None:
        return np.zeros(u.values.shape)
    return u.mask.sink * u.values ** 2


def dirichlet_energy(u: ScalarField) -> float:
    """``∫|∇u|²`` as the weighted sum of squared edge differences (cut edges included)."""
    ex, ey = _edge_energy(u)
    return float(ex.sum() + ey.sum() + _sink_energy(u).sum())


def energy_value(u: ScalarField, f, grid: Grid | None = None) -> float:
    """``½∫|∇u|² - ∫ f u``; equals minus the compliance at the discrete solution."""
    grid = grid or u.grid
    fv = source_values(f, grid)
    work = float(np.sum(np.where(grid.inside, fv * u.values, 0.0))) * grid.h ** 2
    return 0.5 * dirichlet_energy(u) - work


def local_energy(u: ScalarField, grid: Grid | None, x, r: float) -> float:
    """``∫_{B_r(x)} |∇u|²`` summed over edges whose midpoint lies in the ball."""
    grid = grid or u.grid
    if r < 2 * grid.h * (1 - 1e-12):
        raise ValueError("ball under-resolved")
    x = as_point(x)
    ex, ey = _edge_energy(u)
    xs, ys = grid.xs, grid.ys
    mx = (xs[:-1] + xs[1:]) / 2
    my = (ys[:-1] + ys[1:]) / 2
    inx = (mx[None, :] - x[0]) ** 2 + (ys[:, None] - x[1]) ** 2 < r * r
    iny = (xs[None, :] - x[0]) ** 2 + (my[:, None] - x[1]) ** 2 < r * r
    inn = (xs[None, :] - x[0]) ** 2 + (ys[:, None] - x[1]) ** 2 < r * r
    return float(ex[inx].sum() + ey[iny].sum() + _sink_energy(u)[inn].sum())


class JumpSamples(NamedTuple):
    points: np.ndarray      # (n, 2) sample points on the segment
    jump: np.ndarray        # (∂u⁺/∂ν)² - (∂u⁻/∂ν)², zero where invalid
    dplus: np.ndarray
    dminus: np.ndarray
    valid: np.ndarray       # False where a stencil touched a foreign constraint


def normal_jump(u: ScalarField, grid: Grid | None, net: CurveNetwork, segment_index: int,
                samples: int | None = None) -> JumpSamples:
    """Jump of squared one-sided normal derivatives along one segment.

    The ``+`` side is the segment's left normal.  Each one-sided derivative
    is the slope at the curve of the quadratic through ``u = 0`` on the curve
    and bilinear samples at normal offsets ``2h`` and ``3h``.  A sample whose
    interpolation cells contain a constrained or cut-adjacent node is
    flagged invalid.
    """
    grid = grid or u.grid
    h = grid.h
    a, b = net.segments[segment_index]
    d = b - a
    L = float(np.hypot(*d))
    tan = d / L
    nu = np.array([-tan[1], tan[0]])
    n = samples or max(1, int(round(L / h)))
    t = (np.arange(n) + 0.5) / n
    pts = a + t[:, None] * d
    if u.mask is not None:
        constrained = u.mask.constrained | (u.mask.sink > 0)
    else:
        constrained = ~grid.inside
    d1, d2 = 2 * h, 3 * h

    def side(sign):
        p1 = pts + sign * d1 * nu
        p2 = pts + sign * d2 * nu
        ok = _stencil_free(grid, constrained, p1) & _stencil_free(grid, constrained, p2)
        u1 = grid.bilinear(u.values, p1)
        u2 = grid.bilinear(u.values, p2)
        slope = (u1 * d2 ** 2 - u2 * d1 ** 2) / (d1 * d2 * (d2 - d1))
        return slope, ok

    dp, okp = side(+1.0)
    dm, okm = side(-1.0)
    valid = okp & okm
    jump = np.where(valid, dp ** 2 - dm ** 2, 0.0)
    return JumpSamples(pts, jump, dp, dm, valid)


def _stencil_free(grid: Grid, constrained, pts) -> np.ndarray:
    fi = (pts[:, 0] - grid.origin[0]) / grid.h
    fj = (pts[:, 1] - grid.origin[1]) / grid.h
    i0 = np.floor(fi).astype(int)
    j0 = np.floor(fj).astype(int)
    ok = (i0 >= 0) & (j0 >= 0) & (i0 < grid.nx - 1) & (j0 < grid.ny - 1)
    i0 = np.clip(i0, 0, grid.nx - 2)
    j0 = np.clip(j0, 0, grid.ny - 2)
    for di in (0, 1):
        for dj in (0, 1):
            ok &= ~constrained[j0 + dj, i0 + di]
    return ok


# ---------------------------------------------------------------------------
# Text format for grid data


def read_grid_values(path):
    """Read ``grid nx ny x0 y0 h`` followed by ``nx*ny`` row-major values."""
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 6 or tokens[0] != "grid":
        raise ValueError(f"{path}: expected header 'grid nx ny x0 y0 h'")
    nx, ny = int(tokens[1]), int(tokens[2])
    x0, y0, h = float(tokens[3]), float(tokens[4]), float(tokens[5])
    vals = np.array([float(v) for v in tokens[6:]])
    if vals.size != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} values, found {vals.size}")
    return (nx, ny, x0, y0, h), vals.reshape(ny, nx)


def write_field(u: ScalarField | np.ndarray, path, grid: Grid | None = None) -> None:
    if isinstance(u, ScalarField):
        grid, vals = u.grid, u.values
    else:
        vals = np.asarray(u)
    with open(path, "w") as fh:
        fh.write(f"grid {grid.nx} {grid.ny} {float(grid.origin[0])!r} {float(grid.origin[1])!r} {float(grid.h)!r}\n")
        for row in vals:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
