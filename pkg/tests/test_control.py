"""Dwell law, run-time compensation and demand scaling."""

import pytest

from junctionsim import (
    DemandProfile,
    Part,
    build_desk_line,
    control_params,
    controlled_run_time,
    desk_demand_line,
    dwell_time,
)
from junctionsim.errors import NegativeInterval, SaturatedPlatform


def test_dwell_time_linear_region():
    out = dwell_time(
        ratio=0.5, min_dwell=10.0, max_dwell=40.0, nominal_dwell=20.0,
        arrival=100.0, previous_departure=60.0,
    )
    assert out.dwell == pytest.approx(20.0)  # 0.5 * 40
    assert out.extension == 0.0
    assert not out.saturated


def test_dwell_time_clamps():
    low = dwell_time(0.5, 10.0, 40.0, 20.0, arrival=61.0, previous_departure=60.0)
    assert low.dwell == 10.0 and low.extension == 0.0 and not low.saturated

    high = dwell_time(0.5, 10.0, 40.0, 20.0, arrival=200.0, previous_departure=60.0)
    assert high.dwell == 40.0
    assert high.extension == pytest.approx(20.0)
    assert high.saturated


def test_dwell_time_negative_interval():
    with pytest.raises(NegativeInterval):
        dwell_time(0.5, 10.0, 40.0, 20.0, arrival=59.0, previous_departure=60.0)


def test_controlled_run_time_compensation():
    assert controlled_run_time(60.0, 45.0, 0.0) == (60.0, 0.0)
    # Extension within the margin is fully recovered.
    run, resid = controlled_run_time(60.0, 45.0, 10.0)
    assert run == pytest.approx(50.0) and resid == 0.0
    # Extension beyond the margin leaves a residual.
    run, resid = controlled_run_time(60.0, 45.0, 20.0)
    assert run == 45.0 and resid == pytest.approx(5.0)


def test_control_params_zero_demand(desk):
    ctrl = control_params(desk)
    assert all(r == 0.0 for r in ctrl.ratio)
    for seg in desk.segments:
        if seg.platform is not None:
            # At zero demand the nominal dwell clamps to the minimum dwell.
            assert ctrl.nominal_dwell[seg.id] == seg.platform.min_dwell
        assert ctrl.margin[seg.id] == pytest.approx(15.0)


def test_control_params_demand_scaling():
    topo = desk_demand_line()  # base ratio 0.02 everywhere
    ctrl = control_params(topo, DemandProfile(branch2=2.0), reference_headway=1000.0)
    for seg in topo.segments:
        if seg.platform is None:
            continue
        expected = 0.02 * (2.0 if seg.part is Part.BRANCH2 else 1.0)
        assert ctrl.ratio[seg.id] == pytest.approx(expected)
        # nominal dwell = clamp(ratio * reference headway, 10, 40)
        assert ctrl.nominal_dwell[seg.id] == pytest.approx(
            min(max(expected * 1000.0, 10.0), 40.0)
        )


def test_demand_profile_factors():
    demand = DemandProfile(central=2.0, branch1=3.0, everywhere=0.5)
    assert demand.factor(Part.CENTRAL) == pytest.approx(1.0)
    assert demand.factor(Part.BRANCH1) == pytest.approx(1.5)
    assert demand.factor(Part.BRANCH2) == pytest.approx(0.5)
    scaled = demand.scaled(2.0)
    assert scaled.factor(Part.BRANCH2) == pytest.approx(1.0)


def test_saturation_guard():
    topo = desk_demand_line()
    with pytest.raises(SaturatedPlatform):
        control_params(topo, DemandProfile(everywhere=50.0))  # ratio reaches 1
    with pytest.raises(SaturatedPlatform):
        build_desk_line(lam_branch1=1.0, alpha=1.0)
