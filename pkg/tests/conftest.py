import numpy as np
import pytest

from vlasov_dlr import (
    ScenarioParams,
    SpatialGrid,
    VelocityGrid,
    build_fixed_basis,
    initial_state,
)


@pytest.fixture(scope="session")
def xgrid128():
    return SpatialGrid(nx=128, length=4.0 * np.pi)


@pytest.fixture(scope="session")
def vgrid128():
    return VelocityGrid(nv=128, vmin=-6.0, vmax=6.0)


@pytest.fixture(scope="session")
def xgrid16():
    return SpatialGrid(nx=16, length=4.0 * np.pi)


@pytest.fixture(scope="session")
def vgrid16():
    return VelocityGrid(nv=16, vmin=-6.0, vmax=6.0)


@pytest.fixture(scope="session")
def landau_params():
    return ScenarioParams(family="landau", alpha=1e-2, k=0.5)


def make_random_state(xgrid, vgrid, m, r, seed, amplitude=0.1):
    """Maxwellian-plus-noise low-rank state with exactly orthonormal bases."""
    rng = np.random.default_rng(seed)
    basis = build_fixed_basis(vgrid, m)
    state = initial_state(
        ScenarioParams(family="landau", alpha=1e-2, k=0.5), r, basis, xgrid, vgrid
    )
    S = state.S + amplitude * rng.standard_normal(state.S.shape) / r
    return state.__class__(
        xgrid=xgrid, vgrid=vgrid, basis=basis, X=state.X, S=S, V=state.V, t=0.0
    )
