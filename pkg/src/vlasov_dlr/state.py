"""Low-rank representation of the density, its moments, and initial data.

The density is f(x_i, v_j) = f0v_j * sum_kl X_ik S_kl V_jl with X
orthonormal in the dx inner product and V orthonormal in the f0v-weighted
one.  The first m columns of V are the fixed conserved directions, which
makes the low moments linear in columns of K = X S; moments() uses those
fast paths whenever the needed fixed column exists and falls back to
quadrature otherwise.  Both paths agree to machine precision because the
fast-path constants are the discrete quadrature coefficients themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .basis import (
    FixedBasis,
    complete_basis,
    extend_basis,
    spatial_fallbacks,
    velocity_fallbacks,
)
from .grids import SpatialGrid, VelocityGrid


@dataclass(frozen=True)
class LowRankState:
    xgrid: SpatialGrid
    vgrid: VelocityGrid
    basis: FixedBasis
    X: np.ndarray
    S: np.ndarray
    V: np.ndarray
    t: float = 0.0

    @property
    def rank(self) -> int:
        return self.S.shape[0]

    @property
    def m(self) -> int:
        return self.basis.m

    def with_time(self, t: float) -> "LowRankState":
        return replace(self, t=t)

    def orthonormality_defect(self) -> tuple[float, float]:
        """Frobenius distance of the two Gram matrices from the identity."""
        gx = self.X.T @ self.X * self.xgrid.dx
        gv = self.V.T @ (self.vgrid.weights[:, None] * self.V)
        eye = np.eye(self.rank)
        return (
            float(np.linalg.norm(gx - eye)),
            float(np.linalg.norm(gv - eye)),
        )


@dataclass(frozen=True)
class Moments:
    rho: np.ndarray
    j: np.ndarray
    sigma: np.ndarray
    e_density: np.ndarray


@dataclass(frozen=True)
class ScenarioParams:
    """Initial-condition parameters: (1 + alpha*cos(k x)) times a velocity
    profile; `vbar` is the beam speed of the counter-streaming profile."""

    family: str
    alpha: float
    k: float
    vbar: float = 0.0


def reconstruct(state: LowRankState) -> np.ndarray:
    """Dense nx-by-nv samples of f (x-major)."""
    return (state.X @ state.S @ state.V.T) * state.vgrid.f0v[None, :]


def moment_weights(vgrid: VelocityGrid, V: np.ndarray, power: int) -> np.ndarray:
    """Weighted moments <v^power, V_l>_v for every basis column."""
    return (vgrid.weights * vgrid.v**power) @ V


def charge_density(state: LowRankState) -> np.ndarray:
    """rho(x) alone; needed before the field exists."""
    K = state.X @ state.S
    if state.m >= 1:
        return state.basis.norm_1 * K[:, 0]
    return K @ moment_weights(state.vgrid, state.V, 0)


def moments(state: LowRankState, E: np.ndarray) -> Moments:
    K = state.X @ state.S
    basis = state.basis
    m = basis.m
    if m >= 1:
        rho = basis.norm_1 * K[:, 0]
    else:
        rho = K @ moment_weights(state.vgrid, state.V, 0)
    if m >= 2:
        j = basis.norm_v * K[:, 1]
    else:
        j = K @ moment_weights(state.vgrid, state.V, 1)
    sigma = K @ moment_weights(state.vgrid, state.V, 2)
    if m >= 3:
        kinetic = 0.5 * (K[:, :3] @ basis.v2_coeffs)
    else:
        kinetic = 0.5 * sigma
    return Moments(rho=rho, j=j, sigma=sigma, e_density=kinetic + 0.5 * E * E)


def invariants(state: LowRankState, E: np.ndarray) -> tuple[float, float, float]:
    """Total mass, momentum, and energy (kinetic plus electric)."""
    mom = moments(state, E)
    return (
        state.xgrid.integrate(mom.rho),
        state.xgrid.integrate(mom.j),
        state.xgrid.integrate(mom.e_density),
    )


def heat_flux(state: LowRankState) -> np.ndarray:
    """Q(x) = (1/2) integral of v*v^2*f dv, by quadrature."""
    K = state.X @ state.S
    return 0.5 * (K @ moment_weights(state.vgrid, state.V, 3))


def velocity_profile(params: ScenarioParams, vgrid: VelocityGrid) -> np.ndarray:
    """The v-dependence of f divided by the weight f0v."""
    s2pi = np.sqrt(2.0 * np.pi)
    if params.family == "landau":
        return np.full(vgrid.nv, 1.0 / s2pi)
    if params.family == "two_stream":
        vb = params.vbar
        return np.exp(-vb * vb / 2.0) * np.cosh(vb * vgrid.v) / s2pi
    raise ValueError(f"unknown scenario family: {params.family!r}")


def initial_state(
    params: ScenarioParams,
    r: int,
    basis: FixedBasis,
    xgrid: SpatialGrid,
    vgrid: VelocityGrid,
) -> LowRankState:
    """Exact low-rank projection of the separable analytic initial condition.

    The x and v factors each span one direction; the remaining columns are
    deterministic orthonormal padding carrying zero coefficients, so the
    reconstruction is exact regardless of r.
    """
    if r < basis.m:
        raise ValueError(f"rank {r} is below the number of fixed directions {basis.m}")
    if r < 1:
        raise ValueError("rank must be at least 1")
    g = 1.0 + params.alpha * np.cos(params.k * xgrid.x)
    h = velocity_profile(params, vgrid)

    V = extend_basis(vgrid, basis.U, h[:, None])
    if V.shape[1] > r:
        raise ValueError(
            f"rank {r} cannot represent the initial condition exactly "
            f"(needs {V.shape[1]} velocity directions)"
        )
    V = complete_basis(vgrid, V, r, velocity_fallbacks(vgrid))

    X = extend_basis(xgrid, np.zeros((xgrid.nx, 0)), g[:, None])
    X = complete_basis(xgrid, X, r, spatial_fallbacks(xgrid))

    u = (X.T @ g) * xgrid.dx
    w = V.T @ (vgrid.weights * h)
    S = np.outer(u, w)
    return LowRankState(xgrid=xgrid, vgrid=vgrid, basis=basis, X=X, S=S, V=V, t=0.0)


def project_dense(state: LowRankState, F: np.ndarray) -> np.ndarray:
    """Galerkin coefficients of dense samples F on the state's bases."""
    return (state.X.T @ F @ state.V) * (state.xgrid.dx * state.vgrid.dv)


def save_snapshot(state: LowRankState, path) -> None:
    """Write reconstruct(state) as CSV, one row per spatial node."""
    F = reconstruct(state)
    header = f"t={state.t!r} nx={state.xgrid.nx} nv={state.vgrid.nv} (rows: x index)"
    np.savetxt(path, F, delimiter=",", header=header)
