"""Shared fixtures: the desk instance and session-cached sweeps.

The full-grid sweeps are reused across analysis and acceptance tests; they
are deterministic, so caching them per session changes nothing but runtime.
"""

import pytest

from junctionsim import (
    DemandProfile,
    build_desk_line,
    desk_demand_line,
    desk_phase_line,
    sweep,
)


@pytest.fixture(scope="session")
def desk():
    return build_desk_line()


@pytest.fixture(scope="session")
def desk_sweep():
    """Full feasible-grid sweep of the zero-demand desk instance."""
    return sweep(desk_phase_line(), counts=500)


@pytest.fixture(scope="session")
def demand_sweep_base():
    """Full-grid sweep of the light-demand desk instance, demand factor 1."""
    return sweep(desk_demand_line(), counts=500)


@pytest.fixture(scope="session")
def demand_sweep_all_scaled():
    """Same instance with every arrival rate scaled by 1.5."""
    return sweep(desk_demand_line(), demand=DemandProfile(everywhere=1.5), counts=500)


@pytest.fixture(scope="session")
def demand_sweep_b2c_scaled():
    """Same instance with branch-2 and central arrival rates scaled by 1.5."""
    return sweep(
        desk_demand_line(), demand=DemandProfile(central=1.5, branch2=1.5), counts=500
    )
