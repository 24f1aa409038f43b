"""Problem definition: domain, load, penalty and discretization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

from .geometry import CurveNetwork

# snap band in units of h; cut edges resolve the curve below grid scale, which
# keeps the discrete functional continuous in the vertex positions
CUT_SNAP = 0.01
from .solver import (
    ScalarField,
    compliance,
    make_grid,
    rasterize_dirichlet,
    solve_membrane,
)


@dataclass(frozen=True, eq=False)
class Problem:
    domain: object
    source: object
    lam: float
    h: float = 1 / 64
    cg_tol: float = 1e-10
    ghost: bool = True
    snap_tol: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not self.cg_tol > 0:
            raise ValueError("cg_tol must be positive")

    @property
    def p(self) -> float:
        return getattr(self.source, "p", math.inf)

    @cached_property
    def grid(self):
        return make_grid(self.domain, self.h)

    @property
    def tol(self) -> float:
        return self.snap_tol if self.snap_tol is not None else CUT_SNAP * self.h

    def solve(self, net: CurveNetwork | None) -> ScalarField:
        mask = rasterize_dirichlet(net, self.grid, self.tol, ghost=self.ghost)
        return solve_membrane(self.grid, mask, self.source, self.cg_tol)

    def compliance_of(self, u: ScalarField) -> float:
        return compliance(u, self.source, self.grid)
