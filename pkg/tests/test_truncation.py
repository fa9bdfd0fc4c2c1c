import numpy as np
import pytest

from vlasov_dlr import (
    RankContext,
    RankPolicy,
    build_fixed_basis,
    charge_density,
    choose_rank,
    conservative_truncate,
    invariants,
    k_step,
    l_step,
    moments,
    prepare_truncation,
    s_step,
    solve_field,
    step_and_truncate,
)
from vlasov_dlr.stepper import augment

from conftest import make_random_state


def augmented_step(state, tau=1e-3):
    rho = charge_density(state)
    bg = float(np.mean(rho))
    E = solve_field(state.xgrid, rho, background=bg).E
    aug = augment(state, k_step(state, E, tau), l_step(state, E, tau))
    St = s_step(aug, state.S, E, tau)
    return aug, St, E, bg


class TestRankPolicy:
    def test_schedule_lookup(self):
        policy = RankPolicy(
            kind="solution_error", theta_schedule=((0.0, 1e-9), (20.0, 1e-7))
        )
        assert policy.theta_at(0.0) == 1e-9
        assert policy.theta_at(19.999) == 1e-9
        assert policy.theta_at(20.0) == 1e-7
        assert policy.theta_at(45.0) == 1e-7

    def test_validation(self):
        with pytest.raises(ValueError):
            RankPolicy(kind="bogus")
        with pytest.raises(ValueError):
            RankPolicy(kind="fixed", theta_schedule=((0.0, 1e-9), (0.0, 1e-7)))
        with pytest.raises(ValueError):
            RankPolicy(kind="fixed", theta_schedule=((0.0, -1.0),))


class TestConservativeTruncate:
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_conserved_projections_preserved(self, xgrid16, vgrid16, m):
        state = make_random_state(xgrid16, vgrid16, m=m, r=10, seed=m)
        aug, St, E, bg = augmented_step(state)
        K_tilde = aug.Xt @ St
        out = conservative_truncate(aug, St, 6)
        # <U_a, f_out> must equal the corresponding K column exactly
        K_out = out.X @ out.S
        for a in range(m):
            assert np.max(np.abs(K_out[:, a] - K_tilde[:, a])) < 1e-13 * max(
                1.0, np.max(np.abs(K_tilde[:, a]))
            )

    def test_moments_preserved_energy_not(self, xgrid16, vgrid16):
        state = make_random_state(xgrid16, vgrid16, m=2, r=10, seed=7, amplitude=0.3)
        aug, St, E, bg = augmented_step(state)
        full = conservative_truncate(aug, St, prepare_truncation(aug, St).max_rank)
        cut = conservative_truncate(aug, St, 4)
        mom_full = moments(full, E)
        mom_cut = moments(cut, E)
        assert np.max(np.abs(mom_full.rho - mom_cut.rho)) < 1e-13
        assert np.max(np.abs(mom_full.j - mom_cut.j)) < 1e-13
        # sigma (not in the m=2 conserved block) genuinely changes
        assert np.max(np.abs(mom_full.sigma - mom_cut.sigma)) > 1e-9

    def test_full_rank_truncation_lossless(self, xgrid16, vgrid16):
        from vlasov_dlr.state import reconstruct

        state = make_random_state(xgrid16, vgrid16, m=2, r=8, seed=4)
        aug, St, E, bg = augmented_step(state)
        out = conservative_truncate(aug, St, prepare_truncation(aug, St).max_rank)
        F_aug = (aug.Xt @ St @ aug.Vt.T) * vgrid16.f0v[None, :]
        assert np.max(np.abs(reconstruct(out) - F_aug)) < 1e-12 * max(
            1.0, np.max(np.abs(F_aug))
        )

    def test_discarded_tail_is_smallest(self, xgrid16, vgrid16):
        state = make_random_state(xgrid16, vgrid16, m=1, r=10, seed=5, amplitude=0.5)
        aug, St, E, bg = augmented_step(state)
        factors = prepare_truncation(aug, St)
        svals = factors.svals
        assert np.all(np.diff(svals) <= 1e-12)
        out = conservative_truncate(aug, St, 5)
        kept = np.linalg.svd(out.S[:, 1:], compute_uv=False)
        assert np.allclose(kept[: 5 - 1], svals[: 5 - 1], rtol=1e-10)

    def test_output_orthonormal(self, xgrid16, vgrid16):
        state = make_random_state(xgrid16, vgrid16, m=3, r=10, seed=6)
        aug, St, E, bg = augmented_step(state)
        out = conservative_truncate(aug, St, 6)
        gx, gv = out.orthonormality_defect()
        assert gx < 1e-12 and gv < 1e-12
        assert np.all(out.V[:, :3] == state.basis.U)

    def test_rank_below_m_rejected(self, xgrid16, vgrid16):
        state = make_random_state(xgrid16, vgrid16, m=3, r=8, seed=1)
        aug, St, E, bg = augmented_step(state)
        with pytest.raises(ValueError):
            conservative_truncate(aug, St, 2)

    def test_tiny_remainder_value_dropped_exactly(self, xgrid16, vgrid16):
        # remainder singular values (1, 1e-16): keeping one drops nothing
        # that carries density or current
        state = make_random_state(xgrid16, vgrid16, m=2, r=4, seed=13, amplitude=0.0)
        S = state.S.copy()
        S[2, 2] = 1.0
        S[3, 3] = 1e-16
        state = state.__class__(
            xgrid=xgrid16,
            vgrid=vgrid16,
            basis=state.basis,
            X=state.X,
            S=S,
            V=state.V,
        )
        aug, St, E, bg = augmented_step(state, tau=0.0)
        full = conservative_truncate(aug, St, prepare_truncation(aug, St).max_rank)
        cut = conservative_truncate(aug, St, 3)
        f1, f2 = moments(full, E), moments(cut, E)
        assert np.max(np.abs(f1.rho - f2.rho)) < 1e-14
        assert np.max(np.abs(f1.j - f2.j)) < 1e-14


class TestChooseRank:
    def test_solution_error_tail_sums_by_hand(self, xgrid16, vgrid16):
        state = make_random_state(xgrid16, vgrid16, m=0, r=6, seed=2, amplitude=0.0)
        S = np.diag([1.0, 1e-3, 1e-12, 0.0, 0.0, 0.0])
        state = state.__class__(
            xgrid=xgrid16, vgrid=vgrid16, basis=state.basis, X=state.X, S=S, V=state.V
        )
        aug, St, E, bg = augmented_step(state, tau=0.0)
        factors = prepare_truncation(aug, St)
        policy = RankPolicy(kind="solution_error", theta_schedule=((0.0, 1e-6),))
        ctx = RankContext(t=0.0, e_full=0.0, energy_prev=0.0, background=bg)
        rank, saturated = choose_rank(factors, policy, ctx)
        # tail beyond rank 2 is 1e-12 (squared sum 1e-24 <= theta^2); rank 1
        # would discard 1e-3 whose square exceeds theta^2
        assert rank == 2
        assert not saturated

    def test_theta_larger_than_everything(self, xgrid16, vgrid16):
        state = make_random_state(xgrid16, vgrid16, m=2, r=8, seed=3, amplitude=0.2)
        aug, St, E, bg = augmented_step(state)
        factors = prepare_truncation(aug, St)
        policy = RankPolicy(kind="solution_error", theta_schedule=((0.0, 1e9),))
        rank, _ = choose_rank(
            factors, policy, RankContext(t=0.0, e_full=0.0, energy_prev=0.0)
        )
        assert rank == 3  # m + 1, the minimal allowed

    def test_theta_zero_keeps_nonzero_values(self, xgrid16, vgrid16):
        state = make_random_state(xgrid16, vgrid16, m=0, r=5, seed=2, amplitude=0.0)
        S = np.diag([1.0, 1e-2, 1e-5, 0.0, 0.0])
        state = state.__class__(
            xgrid=xgrid16, vgrid=vgrid16, basis=state.basis, X=state.X, S=S, V=state.V
        )
        aug, St, E, bg = augmented_step(state, tau=0.0)
        factors = prepare_truncation(aug, St)
        policy = RankPolicy(kind="solution_error", theta_schedule=((0.0, 0.0),))
        rank, _ = choose_rank(
            factors, policy, RankContext(t=0.0, e_full=0.0, energy_prev=0.0)
        )
        kept = factors.svals[: rank]
        discarded = factors.svals[rank:]
        assert np.all(discarded <= 1e-14)
        assert np.sum(kept > 1e-14) >= 3

    def test_efield_policy_floor_for_conserved_density(self, xgrid16, vgrid16):
        # with m >= 1 the density is entirely in the conserved block, so the
        # electric energy is rank-independent and the floor rank is returned
        state = make_random_state(xgrid16, vgrid16, m=2, r=10, seed=9, amplitude=0.3)
        aug, St, E, bg = augmented_step(state)
        factors = prepare_truncation(aug, St)
        e_full = factors.electric_energy_at(factors.max_rank, bg)
        policy = RankPolicy(
            kind="electric_energy_error", theta_schedule=((0.0, 1e-10),), r_floor=7
        )
        rank, saturated = choose_rank(
            factors, policy, RankContext(t=0.0, e_full=e_full, energy_prev=0.0, background=bg)
        )
        assert rank == 7
        assert not saturated

    def test_energy_policy_saturation_flag(self, xgrid16, vgrid16):
        state = make_random_state(xgrid16, vgrid16, m=2, r=8, seed=10, amplitude=0.4)
        aug, St, E, bg = augmented_step(state)
        factors = prepare_truncation(aug, St)
        e_full = factors.electric_energy_at(factors.max_rank, bg)
        policy = RankPolicy(
            kind="total_energy_error", theta_schedule=((0.0, 1e-30),), r_floor=4
        )
        # energy_prev deliberately far away: no rank can satisfy theta
        rank, saturated = choose_rank(
            factors,
            policy,
            RankContext(t=0.0, e_full=e_full, energy_prev=123.0, background=bg),
        )
        assert saturated
        assert rank == factors.max_rank

    def test_fixed_policy(self, xgrid16, vgrid16):
        state = make_random_state(xgrid16, vgrid16, m=1, r=8, seed=11)
        aug, St, E, bg = augmented_step(state)
        factors = prepare_truncation(aug, St)
        policy = RankPolicy(kind="fixed", r_fixed=8)
        rank, saturated = choose_rank(
            factors, policy, RankContext(t=0.0, e_full=0.0, energy_prev=0.0)
        )
        assert rank == 8 and not saturated

    def test_r_max_cap(self, xgrid16, vgrid16):
        state = make_random_state(xgrid16, vgrid16, m=1, r=8, seed=12, amplitude=0.5)
        aug, St, E, bg = augmented_step(state)
        factors = prepare_truncation(aug, St)
        policy = RankPolicy(
            kind="solution_error", theta_schedule=((0.0, 0.0),), r_max=5
        )
        rank, _ = choose_rank(
            factors, policy, RankContext(t=0.0, e_full=0.0, energy_prev=0.0)
        )
        assert rank <= 5


class TestStepAndTruncate:
    def test_equilibrium_state_unchanged(self, xgrid128, vgrid128):
        from vlasov_dlr import ScenarioParams, initial_state

        basis = build_fixed_basis(vgrid128, 3)
        state = initial_state(
            ScenarioParams(family="landau", alpha=0.0, k=0.5),
            6,
            basis,
            xgrid128,
            vgrid128,
        )
        bg = float(np.mean(charge_density(state)))
        policy = RankPolicy(kind="fixed", r_fixed=6)
        result = step_and_truncate(state, policy, 1e-3, background=bg)
        from vlasov_dlr.state import reconstruct

        assert np.max(
            np.abs(reconstruct(result.state) - reconstruct(state))
        ) < 1e-13 * np.max(np.abs(reconstruct(state)))

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_mass_preserved_across_step(self, xgrid128, vgrid128, m):
        state = make_random_state(xgrid128, vgrid128, m=m, r=8, seed=m + 20)
        rho = charge_density(state)
        bg = float(np.mean(rho))
        E = solve_field(xgrid128, rho, background=bg).E
        before = invariants(state, E)
        policy = RankPolicy(kind="fixed", r_fixed=8)
        result = step_and_truncate(state, policy, 1e-3, background=bg)
        E2 = solve_field(xgrid128, charge_density(result.state), background=bg).E
        after = invariants(result.state, E2)
        assert after[0] == pytest.approx(before[0], rel=1e-12)
        if m >= 2:
            assert abs(after[1] - before[1]) <= 1e-13 * max(1.0, abs(before[1]))
