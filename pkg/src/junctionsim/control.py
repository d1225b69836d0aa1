"""Operational control laws: demand-dependent dwell and run-time compensation.

Dwell at a platform grows with the passengers accumulated since the previous
departure from that platform: ``dwell = clamp(r * interval, min, max)`` with
``r = arrival_rate / exchange_rate < 1``.  A dwell that exceeds the nominal
(schedule) dwell is an *extension*; downstream segments recover extensions by
running faster, down to their minimum run time, and pass any unrecovered
residual further along until the next platform stop absorbs it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NegativeInterval, SaturatedPlatform
from .topology import LineTopology, Part

#: Demand scale factors per part, applied multiplicatively to every platform
#: arrival rate of that part (exchange rates are left untouched).
DEFAULT_DEMAND: dict[Part, float] = {
    Part.CENTRAL: 1.0,
    Part.BRANCH1: 1.0,
    Part.BRANCH2: 1.0,
}


@dataclass(frozen=True)
class DemandProfile:
    """Multiplicative demand scaling on top of the line's base arrival rates."""

    central: float = 1.0
    branch1: float = 1.0
    branch2: float = 1.0
    everywhere: float = 1.0

    def factor(self, part: Part) -> float:
        base = {
            Part.CENTRAL: self.central,
            Part.BRANCH1: self.branch1,
            Part.BRANCH2: self.branch2,
        }[part]
        return base * self.everywhere

    def scaled(self, factor: float) -> "DemandProfile":
        return DemandProfile(
            central=self.central,
            branch1=self.branch1,
            branch2=self.branch2,
            everywhere=self.everywhere * factor,
        )


@dataclass(frozen=True)
class DwellOutcome:
    """Resolved dwell at one platform stop."""

    dwell: float
    extension: float
    saturated: bool


@dataclass(frozen=True)
class ControlParams:
    """Per-segment control data derived from topology, demand and schedule.

    ``ratio[j]`` is the effective arrival/exchange ratio (0 off-platform),
    ``nominal_dwell[j]`` the schedule dwell at the reference headway, and
    ``margin[j]`` the recoverable run-time slack.  ``initial_offset_step``
    staggers the ready times of the initially parked trains.
    """

    reference_headway: float
    ratio: tuple[float, ...]
    min_dwell: tuple[float, ...]
    max_dwell: tuple[float, ...]
    nominal_dwell: tuple[float, ...]
    margin: tuple[float, ...]
    initial_offset_step: float = 0.0


def dwell_time(
    ratio: float,
    min_dwell: float,
    max_dwell: float,
    nominal_dwell: float,
    arrival: float,
    previous_departure: float,
) -> DwellOutcome:
    """Demand-dependent dwell for one stop.

    The accumulation interval runs from the previous departure at this
    platform (time 0.0 before any) to this train's arrival.  The extension
    is the part of the dwell beyond the schedule's nominal dwell.
    """
    interval = arrival - previous_departure
    if interval < 0:
        raise NegativeInterval(
            f"arrival {arrival} precedes previous departure {previous_departure}"
        )
    raw = ratio * interval
    saturated = raw >= max_dwell
    dwell = min(max(raw, min_dwell), max_dwell)
    extension = dwell - nominal_dwell
    if extension < 0.0:
        extension = 0.0
    return DwellOutcome(dwell=dwell, extension=extension, saturated=saturated)


def controlled_run_time(
    nominal_run: float, min_run: float, incoming_extension: float
) -> tuple[float, float]:
    """Run time under compensation and the residual extension passed on.

    The driver recovers as much of the incoming extension as the margin
    allows; the remainder keeps propagating.
    """
    if incoming_extension <= 0.0:
        return nominal_run, 0.0
    run = nominal_run - incoming_extension
    if run < min_run:
        run = min_run
    return run, incoming_extension - (nominal_run - run)


def control_params(
    topology: LineTopology,
    demand: DemandProfile | None = None,
    reference_headway: float = 300.0,
    initial_offset_step: float = 0.0,
) -> ControlParams:
    """Precompute per-segment control arrays.

    The nominal dwell is the dwell the law yields at the reference headway,
    so in a perfectly regular service no extensions arise.
    """
    if demand is None:
        demand = DemandProfile()
    n = len(topology.segments)
    ratio = [0.0] * n
    wmin = [0.0] * n
    wmax = [0.0] * n
    wnom = [0.0] * n
    margin = [0.0] * n
    for seg in topology.segments:
        margin[seg.id] = seg.margin
        p = seg.platform
        if p is None:
            continue
        r = p.ratio * demand.factor(seg.part)
        if r >= 1.0:
            # Scaling cannot push the ratio past saturation silently.
            raise SaturatedPlatform(
                f"segment {seg.id}: scaled arrival/exchange ratio {r} >= 1"
            )
        ratio[seg.id] = r
        wmin[seg.id] = p.min_dwell
        wmax[seg.id] = p.max_dwell
        raw = r * reference_headway
        wnom[seg.id] = min(max(raw, p.min_dwell), p.max_dwell)
    return ControlParams(
        reference_headway=reference_headway,
        ratio=tuple(ratio),
        min_dwell=tuple(wmin),
        max_dwell=tuple(wmax),
        nominal_dwell=tuple(wnom),
        margin=tuple(margin),
        initial_offset_step=initial_offset_step,
    )


__all__ = [
    "DemandProfile",
    "DwellOutcome",
    "ControlParams",
    "dwell_time",
    "controlled_run_time",
    "control_params",
    "DEFAULT_DEMAND",
]
