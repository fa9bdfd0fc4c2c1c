"""Per-step invariants, invariant errors, and continuity residuals.

The residuals are the discrete local balance laws the integrator satisfies
exactly (to roundoff):

    mass      (rho' - rho)/tau + d/dx j                      = 0
    momentum  (j' - j)/tau + d/dx sigma + E rho              = 0
    energy    (e' - e)/tau + d/dx Q - E ((E'-E)/tau - j)     = (E'-E)^2 / (2 tau)

all pointwise in x, primes denoting the next step.  The energy line is an
identity, so the recorded gap is |LHS - (E'-E)^2/(2 tau)|, not the O(tau)
magnitude of either side.  Residual maxima are taken in the max norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import LowRankState, heat_flux, invariants, moments

CSV_COLUMNS = (
    "t",
    "mass",
    "momentum",
    "energy",
    "electric_energy",
    "rank",
    "mass_rel_err",
    "momentum_abs_err",
    "energy_rel_err",
    "cont_mass_res",
    "cont_mom_res",
    "cont_energy_gap",
)


@dataclass(frozen=True)
class InvariantBaseline:
    mass: float
    momentum: float
    energy: float


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    momentum: float
    energy: float
    electric_energy: float
    rank: int
    mass_rel_err: float
    momentum_abs_err: float
    energy_rel_err: float
    mass_continuity_residual_max: float
    momentum_continuity_residual_max: float
    energy_continuity_identity_gap_max: float

    def is_finite(self) -> bool:
        values = [
            self.mass,
            self.momentum,
            self.energy,
            self.electric_energy,
            self.mass_rel_err,
            self.momentum_abs_err,
            self.energy_rel_err,
            self.mass_continuity_residual_max,
            self.momentum_continuity_residual_max,
            self.energy_continuity_identity_gap_max,
        ]
        return bool(np.all(np.isfinite(values)))


def _errors(
    totals: tuple[float, float, float], baseline: InvariantBaseline | None
) -> tuple[float, float, float]:
    if baseline is None:
        return 0.0, 0.0, 0.0
    mass, momentum, energy = totals
    mass_err = abs(mass - baseline.mass) / abs(baseline.mass)
    momentum_err = abs(momentum - baseline.momentum)
    energy_err = abs(energy - baseline.energy) / abs(baseline.energy)
    return mass_err, momentum_err, energy_err


def baseline_record(
    state: LowRankState, E: np.ndarray, baseline: InvariantBaseline | None = None
) -> DiagnosticsRecord:
    """Row for t with no predecessor step; residuals are zero by convention."""
    totals = invariants(state, E)
    mass_err, momentum_err, energy_err = _errors(totals, baseline)
    return DiagnosticsRecord(
        t=state.t,
        mass=totals[0],
        momentum=totals[1],
        energy=totals[2],
        electric_energy=0.5 * state.xgrid.dx * float(np.dot(E, E)),
        rank=state.rank,
        mass_rel_err=mass_err,
        momentum_abs_err=momentum_err,
        energy_rel_err=energy_err,
        mass_continuity_residual_max=0.0,
        momentum_continuity_residual_max=0.0,
        energy_continuity_identity_gap_max=0.0,
    )


def record(
    state_prev: LowRankState,
    state_next: LowRankState,
    E_prev: np.ndarray,
    E_next: np.ndarray,
    tau: float,
    baseline: InvariantBaseline | None = None,
) -> DiagnosticsRecord:
    """Diagnostics across one step (state_prev -> state_next)."""
    xg = state_prev.xgrid
    prev = moments(state_prev, E_prev)
    nxt = moments(state_next, E_next)
    q_flux = heat_flux(state_prev)

    mass_res = (nxt.rho - prev.rho) / tau + xg.deriv(prev.j)
    mom_res = (nxt.j - prev.j) / tau + xg.deriv(prev.sigma) + E_prev * prev.rho
    dE = (E_next - E_prev) / tau
    energy_lhs = (
        (nxt.e_density - prev.e_density) / tau
        + xg.deriv(q_flux)
        - E_prev * (dE - prev.j)
    )
    gap = energy_lhs - tau * dE * dE / 2.0

    totals = invariants(state_next, E_next)
    mass_err, momentum_err, energy_err = _errors(totals, baseline)
    return DiagnosticsRecord(
        t=state_next.t,
        mass=totals[0],
        momentum=totals[1],
        energy=totals[2],
        electric_energy=0.5 * xg.dx * float(np.dot(E_next, E_next)),
        rank=state_next.rank,
        mass_rel_err=mass_err,
        momentum_abs_err=momentum_err,
        energy_rel_err=energy_err,
        mass_continuity_residual_max=float(np.max(np.abs(mass_res))),
        momentum_continuity_residual_max=float(np.max(np.abs(mom_res))),
        energy_continuity_identity_gap_max=float(np.max(np.abs(gap))),
    )


def csv_header() -> str:
    return ",".join(CSV_COLUMNS)


def csv_row(rec: DiagnosticsRecord) -> str:
    values = (
        rec.t,
        rec.mass,
        rec.momentum,
        rec.energy,
        rec.electric_energy,
        rec.rank,
        rec.mass_rel_err,
        rec.momentum_abs_err,
        rec.energy_rel_err,
        rec.mass_continuity_residual_max,
        rec.momentum_continuity_residual_max,
        rec.energy_continuity_identity_gap_max,
    )
    out = []
    for name, value in zip(CSV_COLUMNS, values):
        out.append(str(int(value)) if name == "rank" else f"{value:.17e}")
    return ",".join(out)
