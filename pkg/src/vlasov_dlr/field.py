"""Spectral electrostatic field solve and electric-energy evaluation.

The Poisson problem div E = background - rho is solved mode by mode with
the zero mode of E pinned to zero, so the integral of E vanishes exactly
(which the discrete momentum balance needs).  `background` is the ion
density; runs whose initial electron density is not exactly 1 (finite
velocity domain) pin it to the measured initial mean so the solvability
condition is met by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import SpatialGrid
from .state import LowRankState, moment_weights

NEUTRALITY_TOL = 1e-8


class NeutralityError(ValueError):
    """Mean charge density drifted away from the ion background."""


@dataclass(frozen=True)
class FieldState:
    rho: np.ndarray
    E: np.ndarray
    electric_energy: float


def solve_field(
    grid: SpatialGrid,
    rho: np.ndarray,
    background: float = 1.0,
    enforce_neutrality: bool = True,
) -> FieldState:
    """Solve div E = background - rho on the periodic grid.

    E_hat(k) = (background - rho)_hat(k) / (i k) for k != 0 and E_hat(0) = 0.
    When neutrality is enforced, a mean deviation beyond NEUTRALITY_TOL
    raises instead of silently dropping charge.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (grid.nx,):
        raise ValueError(f"rho has shape {rho.shape}, expected ({grid.nx},)")
    mean = float(np.mean(rho))
    if enforce_neutrality and abs(mean - background) > NEUTRALITY_TOL:
        raise NeutralityError(
            f"mean charge density {mean:.10g} deviates from background "
            f"{background:.10g} by {mean - background:.3e} (tol {NEUTRALITY_TOL:g})"
        )
    rhs_hat = np.fft.rfft(background - rho)
    k = 2.0 * np.pi * np.fft.rfftfreq(grid.nx, d=grid.dx)
    e_hat = np.zeros_like(rhs_hat)
    e_hat[1:] = rhs_hat[1:] / (1j * k[1:])
    if grid.nx % 2 == 0:
        e_hat[-1] = 0.0
    E = np.fft.irfft(e_hat, n=grid.nx)
    mean_e = float(np.mean(E))
    if abs(mean_e) > 1e-12 * max(1.0, float(np.max(np.abs(E)))):
        raise AssertionError(f"field lost its zero mean: {mean_e!r}")
    energy = 0.5 * grid.dx * float(np.dot(E, E))
    return FieldState(rho=rho, E=E, electric_energy=energy)


def electric_energy_partial(
    state: LowRankState,
    l: int,
    background: float = 1.0,
    enforce_neutrality: bool = False,
) -> float:
    """Electric energy of the rank-l reduction of the state.

    The reduction keeps the conserved block (first m columns of K, never
    truncated) plus the leading l-m singular directions of the remainder
    coefficient block.
    """
    m = state.m
    r = state.rank
    lo = max(m, 1)
    if not lo <= l <= r:
        raise ValueError(f"l must be in [{lo}, {r}], got {l}")
    S_rem = state.S[:, m:]
    if l < r and S_rem.shape[1] > 0:
        u, s, vt = np.linalg.svd(S_rem, full_matrices=False)
        keep = l - m
        S_rem = (u[:, :keep] * s[:keep]) @ vt[:keep]
        S_l = np.hstack([state.S[:, :m], S_rem])
    else:
        S_l = state.S
    K = state.X @ S_l
    if m >= 1:
        rho = state.basis.norm_1 * K[:, 0]
    else:
        rho = K @ moment_weights(state.vgrid, state.V, 0)
    return solve_field(
        state.xgrid, rho, background=background, enforce_neutrality=enforce_neutrality
    ).electric_energy
