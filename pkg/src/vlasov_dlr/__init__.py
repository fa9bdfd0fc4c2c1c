"""Conservative dynamical low-rank solver for the 1x1v Vlasov-Poisson system."""

__version__ = "0.1.0"

from .basis import (
    FixedBasis,
    OrthoResult,
    build_fixed_basis,
    unweighted_orthonormalize,
    weighted_orthonormalize,
)
from .diagnostics import DiagnosticsRecord, InvariantBaseline, record
from .driver import PRESETS, RunResult, SimulationConfig, parse_config, run
from .field import FieldState, NeutralityError, electric_energy_partial, solve_field
from .grids import SpatialGrid, VelocityGrid
from .oracle import dense_rhs, dense_step
from .state import (
    LowRankState,
    Moments,
    ScenarioParams,
    charge_density,
    initial_state,
    invariants,
    moments,
    reconstruct,
)
from .stepper import (
    AugmentedState,
    CoefficientSet,
    assemble_coefficients,
    augment,
    k_step,
    l_step,
    s_step,
)
from .truncation import (
    RankContext,
    RankPolicy,
    choose_rank,
    conservative_truncate,
    prepare_truncation,
    step_and_truncate,
)

__all__ = [
    "__version__",
    "FixedBasis",
    "OrthoResult",
    "build_fixed_basis",
    "unweighted_orthonormalize",
    "weighted_orthonormalize",
    "DiagnosticsRecord",
    "InvariantBaseline",
    "record",
    "PRESETS",
    "RunResult",
    "SimulationConfig",
    "parse_config",
    "run",
    "FieldState",
    "NeutralityError",
    "electric_energy_partial",
    "solve_field",
    "SpatialGrid",
    "VelocityGrid",
    "dense_rhs",
    "dense_step",
    "LowRankState",
    "Moments",
    "ScenarioParams",
    "charge_density",
    "initial_state",
    "invariants",
    "moments",
    "reconstruct",
    "AugmentedState",
    "CoefficientSet",
    "assemble_coefficients",
    "augment",
    "k_step",
    "l_step",
    "s_step",
    "RankContext",
    "RankPolicy",
    "choose_rank",
    "conservative_truncate",
    "prepare_truncation",
    "step_and_truncate",
]
