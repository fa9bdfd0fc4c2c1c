"""Conservative rank truncation and the adaptive rank policies.

Truncation splits K = Xt*St into the conserved block (the first m columns,
which carry the low moments) and a remainder.  The remainder is compressed
by SVD; the conserved block is passed through exactly, so the projections
<U_a, f> of the output equal those of the input to roundoff whatever rank
is kept.

Rank selection supports a fixed rank and three error-based policies:
discarded-singular-value tail, error in electric energy, and error in
total energy (the latter two scan candidate ranks against a tolerance and
fall back to a floor rank when even the conserved block suffices).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .basis import unweighted_orthonormalize
from .diagnostics import DiagnosticsRecord, InvariantBaseline, record as make_record
from .field import FieldState, solve_field
from .state import LowRankState, charge_density, invariants
from .stepper import (
    AugmentedState,
    assemble_coefficients,
    augment,
    classic_basis_update,
    classic_l_step,
    k_step,
    l_step,
    s_step,
)

POLICY_KINDS = ("fixed", "solution_error", "electric_energy_error", "total_energy_error")


@dataclass(frozen=True)
class RankPolicy:
    """How the post-step rank is chosen.

    theta_schedule is piecewise constant in time: ((t0, theta0), (t1, theta1), ...)
    with strictly increasing t_i, theta_i >= 0.  r_max of None means no cap
    beyond what the augmented bases can hold.
    """

    kind: str = "fixed"
    theta_schedule: tuple[tuple[float, float], ...] = ((0.0, 1e-9),)
    r_fixed: int = 10
    r_floor: int = 10
    r_max: int | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown rank policy kind: {self.kind!r}")
        times = [t for t, _ in self.theta_schedule]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("theta schedule times must be strictly increasing")
        if any(theta < 0 for _, theta in self.theta_schedule):
            raise ValueError("theta must be nonnegative")
        if not self.theta_schedule and self.kind != "fixed":
            raise ValueError("error-based policies need a theta schedule")

    def theta_at(self, t: float) -> float:
        theta = self.theta_schedule[0][1]
        for t_from, value in self.theta_schedule:
            if t >= t_from:
                theta = value
        return theta


@dataclass(frozen=True)
class RankContext:
    """Inputs the error-based policies compare against."""

    t: float
    e_full: float
    energy_prev: float
    background: float = 1.0


class TruncationFactors:
    """Shared decomposition behind rank choice and truncation.

    Holds the conserved-block QR, the remainder QR and its SVD, and the
    per-direction moment contributions needed to evaluate candidate-rank
    electric/total energies without re-assembling states.
    """

    def __init__(self, aug: AugmentedState, St: np.ndarray):
        self.aug = aug
        xg, vg, basis = aug.xgrid, aug.vgrid, aug.basis
        m = basis.m
        self.m = m
        K = aug.Xt @ St
        self.K_cons = K[:, :m]
        ortho = unweighted_orthonormalize(xg, self.K_cons) if m else None
        if ortho is not None and ortho.replaced:
            warnings.warn(
                f"conserved block rank-deficient; fallback columns at {ortho.replaced}",
                RuntimeWarning,
            )
        self.X_cons = ortho.Q if ortho else np.zeros((xg.nx, 0))
        self.S_cons = ortho.R if ortho else np.zeros((0, 0))
        K_rem = K[:, m:]
        sdx = np.sqrt(xg.dx)
        Qs, Rs = np.linalg.qr(K_rem * sdx)
        self.X_rem_full = Qs / sdx
        u, s, wt = np.linalg.svd(Rs, full_matrices=False)
        # Deterministic sign convention, compensated on the right factor.
        if u.size:
            idx = np.argmax(np.abs(u), axis=0)
            signs = np.sign(u[idx, np.arange(u.shape[1])])
            signs[signs == 0] = 1.0
            u = u * signs[None, :]
            wt = wt * signs[:, None]
        self.svd_u = u
        self.svals = s
        self.svd_wt = wt
        self.W_aug = aug.Vt[:, m:]
        # Per-direction spatial profiles (already scaled by the singular
        # values) and their density / v^2-moment coefficients.
        self.dir_cols = self.X_rem_full @ (u * s[None, :])
        self.dir_rho_coeff = (vg.weights @ self.W_aug) @ wt.T
        self.dir_sigma_coeff = ((vg.weights * vg.v**2) @ self.W_aug) @ wt.T
        if m >= 1:
            self.rho_cons = basis.norm_1 * K[:, 0]
        else:
            self.rho_cons = np.zeros(xg.nx)
        if m:
            self.sigma_cons = K[:, :m] @ basis.v2_coeffs
        else:
            self.sigma_cons = np.zeros(xg.nx)

    @property
    def max_rank(self) -> int:
        return self.m + len(self.svals)

    def rho_at(self, rank: int) -> np.ndarray:
        kept = min(rank - self.m, len(self.svals))
        rho = self.rho_cons
        if self.m == 0 and kept > 0:
            rho = rho + self.dir_cols[:, :kept] @ self.dir_rho_coeff[:kept]
        return rho

    def sigma_at(self, rank: int) -> np.ndarray:
        kept = min(rank - self.m, len(self.svals))
        sigma = self.sigma_cons
        if kept > 0:
            sigma = sigma + self.dir_cols[:, :kept] @ self.dir_sigma_coeff[:kept]
        return sigma

    def electric_energy_at(self, rank: int, background: float) -> float:
        return solve_field(
            self.aug.xgrid, self.rho_at(rank), background, enforce_neutrality=False
        ).electric_energy

    def total_energy_at(self, rank: int, background: float) -> float:
        kinetic = 0.5 * self.aug.xgrid.integrate(self.sigma_at(rank))
        return kinetic + self.electric_energy_at(rank, background)

    def assemble(self, rank: int) -> LowRankState:
        """Build the rank-`rank` state (steps: SVD cut, basis reassembly)."""
        m = self.m
        if rank < m:
            raise ValueError(f"target rank {rank} is below the conserved block size {m}")
        kept = min(rank - m, len(self.svals))
        X_rem = self.X_rem_full @ self.svd_u[:, :kept]
        S_rem = np.diag(self.svals[:kept])
        W_new = self.W_aug @ self.svd_wt[:kept].T
        X_hat = np.hstack([self.X_cons, X_rem])
        ortho = unweighted_orthonormalize(self.aug.xgrid, X_hat)
        blocks = np.zeros((m + kept, m + kept))
        blocks[:m, :m] = self.S_cons
        blocks[m:, m:] = S_rem
        S_new = ortho.R @ blocks
        # Rewrite the W block in an exactly orthonormal basis and push the
        # (roundoff-sized) change of basis into S.  Without this, the Gram
        # defect of V random-walks over thousands of steps and the balance
        # residuals, which see it divided by tau, drift off the roundoff
        # floor.  The reconstruction and the conserved S columns change
        # only at the epsilon level of the rewrite.
        vg = self.aug.vgrid
        U = self.aug.basis.U
        w = vg.weights
        if kept > 0:
            cross = U.T @ (w[:, None] * W_new) if m else np.zeros((0, kept))
            W_res = W_new - U @ cross if m else W_new
            sw = np.sqrt(w)
            Qw, Rw = np.linalg.qr(W_res * sw[:, None])
            W_new = Qw / sw[:, None]
            S_rem_cols = S_new[:, m:]
            S_new = np.hstack(
                [S_new[:, :m] + S_rem_cols @ cross.T, S_rem_cols @ Rw.T]
            )
        V_new = np.hstack([U, W_new])
        return LowRankState(
            xgrid=self.aug.xgrid,
            vgrid=self.aug.vgrid,
            basis=self.aug.basis,
            X=ortho.Q,
            S=S_new,
            V=V_new,
            t=self.aug.t,
        )


def prepare_truncation(aug: AugmentedState, St: np.ndarray) -> TruncationFactors:
    return TruncationFactors(aug, St)


def conservative_truncate(
    aug: AugmentedState, St: np.ndarray, rank: int
) -> LowRankState:
    """Truncate the augmented step back to `rank`, preserving <U_a, f> exactly."""
    return prepare_truncation(aug, St).assemble(rank)


def choose_rank(
    factors: TruncationFactors, policy: RankPolicy, ctx: RankContext
) -> tuple[int, bool]:
    """Pick the post-truncation rank; returns (rank, saturated).

    `saturated` reports that no candidate satisfied an error-based
    tolerance and the cap was returned instead.
    """
    m = factors.m
    avail = factors.max_rank
    r_max = min(policy.r_max, avail) if policy.r_max is not None else avail
    r_max = max(r_max, min(m + 1, avail))
    lo = min(m + 1, avail)

    if policy.kind == "fixed":
        return min(policy.r_fixed, avail), False

    theta = policy.theta_at(ctx.t)
    if policy.kind == "solution_error":
        sq = factors.svals**2
        suffix = np.concatenate([np.cumsum(sq[::-1])[::-1], [0.0]])
        kept = int(np.argmax(suffix <= theta**2))
        return max(lo, min(m + kept, r_max)), False

    if policy.kind == "electric_energy_error":
        def err(rank: int) -> float:
            return abs(ctx.e_full - factors.electric_energy_at(rank, ctx.background))
    elif policy.kind == "total_energy_error":
        def err(rank: int) -> float:
            return abs(ctx.energy_prev - factors.total_energy_at(rank, ctx.background))
    else:  # pragma: no cover - guarded by RankPolicy validation
        raise ValueError(policy.kind)

    if m >= 1 and err(m) <= theta:
        return max(lo, min(policy.r_floor, r_max)), False
    for rank in range(max(m, 1), r_max + 1):
        if err(rank) <= theta:
            return max(lo, min(rank, r_max)), False
    return r_max, True


@dataclass(frozen=True)
class StepResult:
    state: LowRankState
    field: FieldState
    rank: int
    saturated: bool
    record: DiagnosticsRecord | None = None


def step_and_truncate(
    state: LowRankState,
    policy: RankPolicy,
    tau: float,
    background: float = 1.0,
    enforce_neutrality: bool = True,
    baseline: InvariantBaseline | None = None,
    with_record: bool = False,
    t_next: float | None = None,
    stabilizer=None,
) -> StepResult:
    """One full integrator step: field solve, K/L updates, augmentation,
    Galerkin coefficient update, rank choice, conservative truncation.

    An optional stabilizer is applied to the truncated state before the
    diagnostics are taken; the balance identities then hold across the
    stabilized pair (the filter preserves the conserved integrals and, on
    resolved states, touches nothing above roundoff)."""
    field_state = solve_field(
        state.xgrid, charge_density(state), background, enforce_neutrality
    )
    E = field_state.E
    coeffs = assemble_coefficients(state, E)
    K_new = k_step(state, E, tau, coeffs)
    if state.m == 0:
        # the classic integrator: new bases from the K/L updates alone, no
        # augmentation, so nothing is conserved (the comparison baseline)
        L_new = classic_l_step(state, E, tau, coeffs)
        aug = classic_basis_update(state, K_new, L_new)
    else:
        L_new = l_step(state, E, tau, coeffs)
        aug = augment(state, K_new, L_new)
    St = s_step(aug, state.S, E, tau)
    factors = prepare_truncation(aug, St)

    if policy.kind in ("electric_energy_error", "total_energy_error"):
        e_full = factors.electric_energy_at(factors.max_rank, background)
    else:
        e_full = field_state.electric_energy
    if policy.kind == "total_energy_error":
        energy_prev = invariants(state, E)[2]
    else:
        energy_prev = 0.0
    ctx = RankContext(
        t=state.t, e_full=e_full, energy_prev=energy_prev, background=background
    )
    rank, saturated = choose_rank(factors, policy, ctx)
    new_state = factors.assemble(rank)
    if stabilizer is not None:
        new_state = stabilizer.apply(new_state)
    new_state = new_state.with_time(t_next if t_next is not None else state.t + tau)

    rec = None
    if with_record:
        field_next = solve_field(
            state.xgrid, charge_density(new_state), background, enforce_neutrality
        )
        rec = make_record(state, new_state, E, field_next.E, tau, baseline)
    return StepResult(
        state=new_state, field=field_state, rank=rank, saturated=saturated, record=rec
    )
