"""One augmented basis-update step: coefficients, K/L/S updates, augmentation.

The update is formulated entirely through the coefficient matrices

    c1_kj = <V_k, v V_j>_v          c2_kj = (V_k, d/dv(f0v V_j))_v
    d1_ik = <X_i, E X_k>_x          d2_ik = <X_i, d/dx X_k>_x

so a step costs O((nx+nv) r^2 + r^3) instead of touching the dense grid.

Two finite-precision rules make the conservation identities exact:

* rows of c2 belonging to fixed basis columns are set to their closed-form
  values instead of being computed by quadrature (the quadrature picks up a
  velocity-boundary defect of order f0v(vmax), which would leak mass);
* the augmented bases keep the previous bases as bit-identical leading
  blocks, so projecting X^n, V^n onto them is exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import FixedBasis, extend_basis
from .grids import SpatialGrid, VelocityGrid
from .state import LowRankState


@dataclass(frozen=True)
class CoefficientSet:
    c1: np.ndarray
    c2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


@dataclass(frozen=True)
class AugmentedState:
    """Enlarged bases spanning {X, dX/dx, K_new} and {U, W, L_new}.

    M and N are the projection coefficients of the old bases onto the new
    ones; because the old bases are leading blocks, projecting X^n, V^n
    (and dX^n/dx, which is kept as a candidate) back is exact.
    """

    xgrid: SpatialGrid
    vgrid: VelocityGrid
    basis: FixedBasis
    Xt: np.ndarray
    Vt: np.ndarray
    M: np.ndarray
    N: np.ndarray
    t: float

    @property
    def p(self) -> int:
        return self.Xt.shape[1]

    @property
    def q(self) -> int:
        return self.Vt.shape[1]


def velocity_coefficients(
    vgrid: VelocityGrid, basis: FixedBasis, V: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """c1 and c2 on an arbitrary orthonormal velocity basis V.

    c2 is computed from the derivative of the product f0v*V taken as one
    array (no product rule), then its fixed rows are overwritten with the
    exact values; both points are required for discrete conservation.
    """
    w = vgrid.weights
    c1 = V.T @ ((w * vgrid.v)[:, None] * V)
    dfV = vgrid.deriv(vgrid.f0v[:, None] * V, axis=0)
    c2 = (V.T @ dfV) * vgrid.dv
    for a, (col, value) in enumerate(basis.c2_fixed_row_values()):
        c2[a, :] = 0.0
        if col >= 0:
            c2[a, col] = value
    return c1, c2


def spatial_coefficients(
    xgrid: SpatialGrid, X: np.ndarray, E: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """d1 (field coupling, symmetric) and d2 (advection, antisymmetric)."""
    d1 = (X.T @ (E[:, None] * X)) * xgrid.dx
    d2 = (X.T @ xgrid.deriv(X, axis=0)) * xgrid.dx
    return d1, d2


def assemble_coefficients(state: LowRankState, E: np.ndarray) -> CoefficientSet:
    c1, c2 = velocity_coefficients(state.vgrid, state.basis, state.V)
    d1, d2 = spatial_coefficients(state.xgrid, state.X, E)
    return CoefficientSet(c1=c1, c2=c2, d1=d1, d2=d2)


def k_step(
    state: LowRankState,
    E: np.ndarray,
    tau: float,
    coeffs: CoefficientSet | None = None,
) -> np.ndarray:
    """Explicit Euler update of K = X S with frozen velocity basis."""
    if coeffs is None:
        coeffs = assemble_coefficients(state, E)
    K = state.X @ state.S
    dK = state.xgrid.deriv(K, axis=0)
    return K - tau * (dK @ coeffs.c1.T) + tau * ((E[:, None] * K) @ coeffs.c2.T)


def l_step(
    state: LowRankState,
    E: np.ndarray,
    tau: float,
    coeffs: CoefficientSet | None = None,
) -> np.ndarray:
    """Explicit Euler update of L_q = sum_ip S_iq S_ip W_p for q > m.

    The 1/f0v in the evolution equation is only ever applied to the
    combined array d/dv(f0v V); that ratio is bounded and tail-accurate,
    unlike dividing smooth data by the Gaussian tail.
    """
    m = state.m
    r = state.rank
    if r == m:
        return np.zeros((state.vgrid.nv, 0))
    if coeffs is None:
        coeffs = assemble_coefficients(state, E)
    S, V = state.S, state.V
    d1S = coeffs.d1 @ S
    d2S = coeffs.d2 @ S
    A = S.T @ d2S
    B = S.T @ d1S
    s_dot = -d2S @ coeffs.c1.T + d1S @ coeffs.c2.T
    C = S.T @ s_dot
    f0 = state.vgrid.f0v
    G = state.vgrid.deriv(f0[:, None] * V, axis=0) / f0[:, None]
    vV = state.vgrid.v[:, None] * V
    L_old = V[:, m:] @ (S.T @ S)[m:, m:]
    update = -vV @ A.T + G @ B.T - V @ C.T
    return L_old + tau * update[:, m:]


def classic_l_step(
    state: LowRankState,
    E: np.ndarray,
    tau: float,
    coeffs: CoefficientSet | None = None,
) -> np.ndarray:
    """Euler update of L = V S^T with frozen spatial basis (classic scheme).

    Used by the m = 0 baseline, which updates bases without augmentation and
    therefore conserves nothing; the conservative integrator never calls
    this."""
    if coeffs is None:
        coeffs = assemble_coefficients(state, E)
    S, V = state.S, state.V
    f0 = state.vgrid.f0v
    G = state.vgrid.deriv(f0[:, None] * V, axis=0) / f0[:, None]
    vV = state.vgrid.v[:, None] * V
    L = V @ S.T
    return L + tau * (-vV @ (coeffs.d2 @ S) + G @ (coeffs.d1 @ S))


def classic_basis_update(
    state: LowRankState, K_new: np.ndarray, L_new: np.ndarray
) -> AugmentedState:
    """New bases of the classic (non-augmented) integrator: QR of the K and
    L updates alone, rank unchanged.  Projecting the old solution onto them
    is lossy; this is the baseline the conservative scheme is measured
    against."""
    from .basis import unweighted_orthonormalize, weighted_orthonormalize

    xg, vg = state.xgrid, state.vgrid
    Xt = unweighted_orthonormalize(xg, K_new).Q
    Vt = weighted_orthonormalize(vg, L_new).Q
    M = (Xt.T @ state.X) * xg.dx
    N = Vt.T @ (vg.weights[:, None] * state.V)
    return AugmentedState(
        xgrid=xg, vgrid=vg, basis=state.basis, Xt=Xt, Vt=Vt, M=M, N=N, t=state.t
    )


def augment(state: LowRankState, K_new: np.ndarray, L_new: np.ndarray) -> AugmentedState:
    """Orthonormal bases of span{X, dX/dx, K_new} and span{U, W, L_new}.

    The previous bases are kept bit-identical as leading blocks; numerically
    dependent candidate columns are dropped (near equilibrium dX/dx and the
    K update carry no new directions, and at full rank there is no room).
    """
    xg, vg = state.xgrid, state.vgrid
    dX = xg.deriv(state.X, axis=0)
    Xt = extend_basis(xg, state.X, np.hstack([dX, K_new]))
    Vt = extend_basis(vg, state.V, L_new)
    M = (Xt.T @ state.X) * xg.dx
    N = Vt.T @ (vg.weights[:, None] * state.V)
    return AugmentedState(
        xgrid=xg, vgrid=vg, basis=state.basis, Xt=Xt, Vt=Vt, M=M, N=N, t=state.t
    )


def s_step(
    aug: AugmentedState, S_old: np.ndarray, E: np.ndarray, tau: float
) -> np.ndarray:
    """Galerkin update of the coefficient matrix on the augmented bases.

    S_bar = M S_old N^T expresses the old solution exactly in the new
    bases; the Euler increment uses coefficient matrices rebuilt on those
    bases with the same field E."""
    S_bar = aug.M @ S_old @ aug.N.T
    c1t, c2t = velocity_coefficients(aug.vgrid, aug.basis, aug.Vt)
    d1t, d2t = spatial_coefficients(aug.xgrid, aug.Xt, E)
    return S_bar + tau * (-(d2t @ S_bar) @ c1t.T + (d1t @ S_bar) @ c2t.T)
