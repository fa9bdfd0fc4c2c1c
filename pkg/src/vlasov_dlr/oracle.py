"""Full-grid explicit-Euler reference solver.

Ground truth for equivalence tests: it uses the *same* discrete operators
(spectral x derivative, centered v derivative with zero ghosts, rectangle
quadrature, spectral field solve) applied to dense nx-by-nv samples of f,
so one low-rank step at full rank must match one dense step to roundoff.
Test-grade code; no performance work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import FieldState, solve_field
from .grids import SpatialGrid, VelocityGrid


@dataclass(frozen=True)
class DenseState:
    F: np.ndarray
    t: float = 0.0


def dense_rho(vgrid: VelocityGrid, F: np.ndarray) -> np.ndarray:
    return F.sum(axis=1) * vgrid.dv


def dense_rhs(
    xgrid: SpatialGrid, vgrid: VelocityGrid, F: np.ndarray, E: np.ndarray
) -> np.ndarray:
    """-v df/dx + E df/dv with the shared grid operators.

    The v derivative acts on f as a whole (f carries the f0v weight), the
    same way the low-rank side differentiates f0v*V products.
    """
    if F.shape != (xgrid.nx, vgrid.nv):
        raise ValueError(f"F has shape {F.shape}, expected ({xgrid.nx}, {vgrid.nv})")
    if E.shape != (xgrid.nx,):
        raise ValueError(f"E has shape {E.shape}, expected ({xgrid.nx},)")
    return -vgrid.v[None, :] * xgrid.deriv(F, axis=0) + E[:, None] * vgrid.deriv(
        F, axis=1
    )


def dense_field(
    xgrid: SpatialGrid,
    vgrid: VelocityGrid,
    F: np.ndarray,
    background: float = 1.0,
    enforce_neutrality: bool = False,
) -> FieldState:
    return solve_field(
        xgrid, dense_rho(vgrid, F), background=background, enforce_neutrality=enforce_neutrality
    )


def dense_step(
    xgrid: SpatialGrid,
    vgrid: VelocityGrid,
    F: np.ndarray,
    tau: float,
    background: float = 1.0,
) -> np.ndarray:
    field = dense_field(xgrid, vgrid, F, background=background)
    return F + tau * dense_rhs(xgrid, vgrid, F, field.E)


def dense_invariants(
    xgrid: SpatialGrid, vgrid: VelocityGrid, F: np.ndarray, E: np.ndarray
) -> tuple[float, float, float]:
    """Mass, momentum, and total energy of dense samples."""
    dxdv = xgrid.dx * vgrid.dv
    mass = float(F.sum()) * dxdv
    momentum = float((F * vgrid.v[None, :]).sum()) * dxdv
    kinetic = 0.5 * float((F * (vgrid.v**2)[None, :]).sum()) * dxdv
    electric = 0.5 * xgrid.dx * float(np.dot(E, E))
    return mass, momentum, kinetic + electric
