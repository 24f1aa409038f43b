"""Flux-side verification: feasibility of ``σ = ∇u`` and the zero duality gap.

Fluxes live on the staggered grid edges.  Feasibility is written with the
sign of the state equation, ``-div σ = f`` off the network, so that the
gradient of the solved displacement is the feasible minimal-norm flux.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CurveNetwork
from .solver import DirichletMask, Grid, ScalarField, compliance, dirichlet_energy, source_values

__all__ = [
    "VectorField",
    "DualReport",
    "gradient_flux",
    "divergence",
    "divergence_residual",
    "flux_energy",
    "curl_field",
    "duality_gap",
]


@dataclass(frozen=True, eq=False)
class VectorField:
    """``sx[j, i]`` on the edge (j,i)-(j,i+1), ``sy[j, i]`` on (j,i)-(j+1,i).

    ``ax``/``ay`` are the quadrature areas of the edges (``h²`` on ordinary
    edges, ``h²/w`` on ghost-weighted ones, zero on cut edges).  ``sink`` is
    the outward flux from a node into the curve through its cut edges, with
    areas ``asink``.
    """

    grid: Grid
    sx: np.ndarray
    sy: np.ndarray
    ax: np.ndarray | None = None
    ay: np.ndarray | None = None
    sink: np.ndarray | None = None
    asink: np.ndarray | None = None

    def areas(self):
        h2 = self.grid.h ** 2
        ax = self.ax if self.ax is not None else np.full(self.sx.shape, h2)
        ay = self.ay if self.ay is not None else np.full(self.sy.shape, h2)
        return ax, ay

    def __add__(self, other: "VectorField") -> "VectorField":
        sink = self.sink
        if other.sink is not None:
            sink = other.sink if sink is None else sink + other.sink
        return VectorField(self.grid, self.sx + other.sx, self.sy + other.sy, self.ax, self.ay,
                           sink, self.asink if self.asink is not None else other.asink)


def _areas(h2, w):
    return np.divide(h2, w, out=np.zeros_like(w, dtype=float), where=w > 0)


@dataclass
class DualReport:
    divergence_residual: float
    primal: float
    dual: float
    gap: float
    compliance: float
    zero_source: bool = False


def gradient_flux(u: ScalarField, grid: Grid | None = None) -> VectorField:
    grid = grid or u.grid
    h = grid.h
    if u.mask is not None:
        wx, wy, dg = u.mask.wx, u.mask.wy, u.mask.sink
    else:
        wx, wy = np.ones((grid.ny, grid.nx - 1)), np.ones((grid.ny - 1, grid.nx))
        dg = np.zeros(grid.shape)
    sx = wx * np.diff(u.values, axis=1) / h
    sy = wy * np.diff(u.values, axis=0) / h
    sink = -dg * u.values / h
    return VectorField(grid, sx, sy, _areas(h * h, wx), _areas(h * h, wy), sink, _areas(h * h, dg))


def divergence(s: VectorField) -> np.ndarray:
    """Node-centred staggered divergence (values on boundary rows use zero flux outside)."""
    g = s.grid
    div = np.zeros(g.shape)
    div[:, :-1] += s.sx
    div[:, 1:] -= s.sx
    div[:-1, :] += s.sy
    div[1:, :] -= s.sy
    if s.sink is not None:
        div += s.sink
    return div / g.h


def divergence_residual(s: VectorField, f, grid: Grid | None, mask: DirichletMask):
    """Relative L² misfit of ``-div σ = f`` over the unconstrained nodes.

    Returns ``(residual, flag)``; the flag is True when ``f`` vanishes there
    and the residual is absolute.
    """
    grid = grid or s.grid
    free = mask.free
    fv = source_values(f, grid)[free]
    r = (-divergence(s))[free] - fv
    fn = float(np.linalg.norm(fv))
    if fn == 0.0:
        return float(np.linalg.norm(r)) * grid.h, True
    return float(np.linalg.norm(r)) / fn, False


def flux_energy(s: VectorField) -> float:
    """``½∫|σ|²`` with the edge quadrature areas."""
    ax, ay = s.areas()
    e = float(np.sum(ax * s.sx ** 2) + np.sum(ay * s.sy ** 2))
    if s.sink is not None and s.asink is not None:
        e += float(np.sum(s.asink * s.sink ** 2))
    return 0.5 * e


def curl_field(grid: Grid, psi: np.ndarray) -> VectorField:
    """Divergence-free flux from a stream function on cell centres ``(ny-1, nx-1)``.

    Rows/columns of edges outside the cell layout get zero.
    """
    h = grid.h
    sx = np.zeros((grid.ny, grid.nx - 1))
    sy = np.zeros((grid.ny - 1, grid.nx))
    pad = np.zeros((grid.ny + 1, grid.nx + 1))
    pad[1:-1, 1:-1] = psi
    # x-edge (j, i+1/2) sits between cell centres (j-1/2, i+1/2) and (j+1/2, i+1/2)
    sx[:, :] = (pad[1:, 1:-1] - pad[:-1, 1:-1]) / h
    sy[:, :] = -(pad[1:-1, 1:] - pad[1:-1, :-1]) / h
    return VectorField(grid, sx, sy)


def duality_gap(problem, net: CurveNetwork | None) -> DualReport:
    """Solve, set ``σ = ∇u`` and compare primal, dual and compliance values."""
    u = problem.solve(net)
    s = gradient_flux(u)
    res, flag = divergence_residual(s, problem.source, problem.grid, u.mask)
    primal = 0.5 * dirichlet_energy(u)
    dual = flux_energy(s)
    C = compliance(u, problem.source, problem.grid)
    return DualReport(res, primal, dual, abs(primal - C), C, flag)
