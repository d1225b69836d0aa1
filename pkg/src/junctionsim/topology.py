"""Line topology: segments, junction wiring, validation, and train seeding.

The line has a central part and two branches joined at a junction.  Both
travel directions are modeled, so the directed segment graph contains two
overlapping circuits (central + branch 1, central + branch 2) that share the
central segments.  Outbound means "away from the central terminus, toward a
branch terminus"; inbound is the return direction.  Terminus turnarounds are
folded into the run time of the segment entered after the turn, so the graph
is a pure segment circuit:

    central outbound:  T0 -> ... -> divergence segment D
    branch u:          head_u -> ... -> branch terminus -> ... -> tail_u
    central inbound:   convergence segment C -> ... -> T0 (wraps to outbound)

D has two successors (the branch heads) and C has two predecessors (the
branch tails); every other segment has exactly one of each.  Which branch a
given departure uses is resolved by strict 1:1 alternation, parameterized by
the first merging branch (``first_branch``) and the derived first dispatch
branch (see :func:`junction_offsets`).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import (
    EmptyPart,
    InfeasibleSeed,
    MarginViolation,
    NonPositiveRunTime,
    SaturatedPlatform,
)


class Part(str, Enum):
    CENTRAL = "central"
    BRANCH1 = "branch1"
    BRANCH2 = "branch2"


class Direction(str, Enum):
    OUTBOUND = "outbound"
    INBOUND = "inbound"


@dataclass(frozen=True)
class PlatformParams:
    """Demand and dwell bounds for one platform.

    ``arrival_rate`` (passengers/s) and ``exchange_rate`` (passengers/s)
    set the demand-dependent dwell through their ratio; the ratio must stay
    below 1 or the dwell law has no bounded fixed point.
    """

    arrival_rate: float
    exchange_rate: float
    min_dwell: float
    max_dwell: float

    def __post_init__(self) -> None:
        if self.arrival_rate < 0:
            raise SaturatedPlatform(
                f"platform arrival_rate must be >= 0, got {self.arrival_rate}"
            )
        if self.exchange_rate <= 0:
            raise SaturatedPlatform(
                f"platform exchange_rate must be > 0, got {self.exchange_rate}"
            )
        if self.arrival_rate >= self.exchange_rate:
            raise SaturatedPlatform(
                "platform arrival_rate/exchange_rate = "
                f"{self.arrival_rate}/{self.exchange_rate} >= 1; "
                "the dwell law is unbounded"
            )
        if self.min_dwell < 0:
            raise SaturatedPlatform(
                f"platform min_dwell must be >= 0, got {self.min_dwell}"
            )
        if self.max_dwell < self.min_dwell:
            raise SaturatedPlatform(
                f"platform max_dwell {self.max_dwell} < min_dwell {self.min_dwell}"
            )

    @property
    def ratio(self) -> float:
        return self.arrival_rate / self.exchange_rate


@dataclass(frozen=True)
class Segment:
    """One elementary block of track, holding at most one train."""

    id: int
    part: Part
    direction: Direction
    nominal_run_time: float
    min_run_time: float
    safe_separation_time: float
    platform: PlatformParams | None = None

    def __post_init__(self) -> None:
        where = f"segment {self.id} ({self.part.value}/{self.direction.value})"
        if self.nominal_run_time <= 0:
            raise NonPositiveRunTime(
                f"{where}: nominal_run_time must be > 0, got {self.nominal_run_time}"
            )
        if self.min_run_time <= 0:
            raise NonPositiveRunTime(
                f"{where}: min_run_time must be > 0, got {self.min_run_time}"
            )
        if self.min_run_time > self.nominal_run_time:
            raise MarginViolation(
                f"{where}: min_run_time {self.min_run_time} exceeds "
                f"nominal_run_time {self.nominal_run_time}"
            )
        if self.safe_separation_time < 0:
            raise NonPositiveRunTime(
                f"{where}: safe_separation_time must be >= 0, "
                f"got {self.safe_separation_time}"
            )

    @property
    def margin(self) -> float:
        return self.nominal_run_time - self.min_run_time


@dataclass(frozen=True)
class LineTopology:
    """Validated directed segment graph of the line.

    ``successor[j]`` / ``predecessor[j]`` are unique except at the junction:
    ``successor[divergence_id]`` is ``None`` (two successors, the branch
    heads) and ``predecessor[convergence_id]`` is ``None`` (two predecessors,
    the branch tails).
    """

    segments: tuple[Segment, ...]
    successor: tuple[int | None, ...]
    predecessor: tuple[int | None, ...]
    convergence_id: int
    divergence_id: int
    branch_heads: tuple[int, int]
    branch_tails: tuple[int, int]

    def part_segments(self, part: Part) -> tuple[Segment, ...]:
        return tuple(s for s in self.segments if s.part is part)

    def part_ids(self, part: Part) -> tuple[int, ...]:
        return tuple(s.id for s in self.segments if s.part is part)

    def circuit_ids(self, branch: Part) -> tuple[int, ...]:
        """Segment ids of the circuit through ``branch`` (central + branch)."""
        if branch not in (Part.BRANCH1, Part.BRANCH2):
            raise ValueError(f"circuit is defined per branch, got {branch}")
        return self.part_ids(Part.CENTRAL) + self.part_ids(branch)

    def central_path_ids(self) -> tuple[int, ...]:
        """Central segment ids in travel order from the convergence to the divergence."""
        path = [self.convergence_id]
        while path[-1] != self.divergence_id:
            nxt = self.successor[path[-1]]
            assert nxt is not None  # only the divergence lacks a unique successor
            path.append(nxt)
        return tuple(path)

    def branch_path_ids(self, branch: Part) -> tuple[int, ...]:
        """Branch segment ids in travel order from head to tail."""
        b = 0 if branch is Part.BRANCH1 else 1
        path = [self.branch_heads[b]]
        while path[-1] != self.branch_tails[b]:
            nxt = self.successor[path[-1]]
            assert nxt is not None
            path.append(nxt)
        return tuple(path)


@dataclass(frozen=True)
class TrainConfiguration:
    """Initial occupancy (one bit per segment) plus junction alternation seed."""

    occupancy: tuple[int, ...]
    first_branch: Part
    m: int
    m1: int
    m2: int
    dm: int

    def __post_init__(self) -> None:
        if self.first_branch not in (Part.BRANCH1, Part.BRANCH2):
            raise InfeasibleSeed(
                f"first_branch must be a branch part, got {self.first_branch}"
            )
        if any(b not in (0, 1) for b in self.occupancy):
            raise InfeasibleSeed("occupancy entries must be 0 or 1")
        if sum(self.occupancy) != self.m:
            raise InfeasibleSeed(
                f"occupancy sums to {sum(self.occupancy)} but m={self.m}"
            )


def _parse_platform(raw: dict, where: str) -> PlatformParams:
    try:
        return PlatformParams(
            arrival_rate=float(raw["lambda"]),
            exchange_rate=float(raw["alpha"]),
            min_dwell=float(raw["min_dwell"]),
            max_dwell=float(raw["max_dwell"]),
        )
    except KeyError as exc:
        raise SaturatedPlatform(f"{where}: platform is missing field {exc}") from exc


def _parse_segments(
    raw_list: list, part: Part, direction: Direction, start_id: int
) -> list[Segment]:
    segments = []
    for i, raw in enumerate(raw_list):
        where = f"{part.value}.{direction.value}[{i}]"
        try:
            run = float(raw["run_time"])
            min_run = float(raw.get("min_run_time", raw["run_time"]))
            sep = float(raw["safe_separation"])
        except KeyError as exc:
            raise NonPositiveRunTime(f"{where}: missing field {exc}") from exc
        platform = None
        if raw.get("platform") is not None:
            platform = _parse_platform(raw["platform"], where)
        segments.append(
            Segment(
                id=start_id + i,
                part=part,
                direction=direction,
                nominal_run_time=run,
                min_run_time=min_run,
                safe_separation_time=sep,
                platform=platform,
            )
        )
    return segments


def build_line(description: dict) -> LineTopology:
    """Build and validate a LineTopology from a JSON-compatible description.

    Schema::

        {"central": {"outbound": [SEG, ...], "inbound": [SEG, ...]},
         "branch1": {...}, "branch2": {...}}

    where SEG = ``{"run_time": s, "min_run_time": s, "safe_separation": s,
    "platform": {"lambda", "alpha", "min_dwell", "max_dwell"} | null}``.
    Segment ids are assigned in the order central.outbound, central.inbound,
    branch1.outbound, branch1.inbound, branch2.outbound, branch2.inbound.
    """
    parts = (
        (Part.CENTRAL, Direction.OUTBOUND),
        (Part.CENTRAL, Direction.INBOUND),
        (Part.BRANCH1, Direction.OUTBOUND),
        (Part.BRANCH1, Direction.INBOUND),
        (Part.BRANCH2, Direction.OUTBOUND),
        (Part.BRANCH2, Direction.INBOUND),
    )
    groups: dict[tuple[Part, Direction], list[Segment]] = {}
    next_id = 0
    for part, direction in parts:
        part_raw = description.get(part.value)
        if part_raw is None:
            raise EmptyPart(f"line description is missing part '{part.value}'")
        raw_list = part_raw.get(direction.value, [])
        if not raw_list:
            raise EmptyPart(f"{part.value}.{direction.value} has no segments")
        groups[(part, direction)] = _parse_segments(raw_list, part, direction, next_id)
        next_id += len(raw_list)

    segments = tuple(s for key in parts for s in groups[key])
    for part in (Part.CENTRAL, Part.BRANCH1, Part.BRANCH2):
        if not any(s.platform is not None for s in segments if s.part is part):
            raise EmptyPart(f"part '{part.value}' has no platform")

    n = len(segments)
    successor: list[int | None] = [None] * n
    predecessor: list[int | None] = [None] * n

    def chain(seq: list[Segment]) -> None:
        for a, b in zip(seq, seq[1:]):
            successor[a.id] = b.id
            predecessor[b.id] = a.id

    c_out = groups[(Part.CENTRAL, Direction.OUTBOUND)]
    c_in = groups[(Part.CENTRAL, Direction.INBOUND)]
    chain(c_out)
    chain(c_in)
    # Central terminus turnaround: inbound tail wraps to outbound head.
    successor[c_in[-1].id] = c_out[0].id
    predecessor[c_out[0].id] = c_in[-1].id

    heads = []
    tails = []
    for part in (Part.BRANCH1, Part.BRANCH2):
        b_out = groups[(part, Direction.OUTBOUND)]
        b_in = groups[(part, Direction.INBOUND)]
        chain(b_out)
        chain(b_in)
        # Branch terminus turnaround: outbound tail wraps to inbound head.
        successor[b_out[-1].id] = b_in[0].id
        predecessor[b_in[0].id] = b_out[-1].id
        heads.append(b_out[0].id)
        tails.append(b_in[-1].id)
        # Junction wiring: heads are fed by the divergence, tails feed the
        # convergence; those links are parity-resolved, not stored here.
        predecessor[b_out[0].id] = None
        successor[b_in[-1].id] = None

    divergence = c_out[-1].id
    convergence = c_in[0].id
    successor[divergence] = None
    predecessor[convergence] = None

    topology = LineTopology(
        segments=segments,
        successor=tuple(successor),
        predecessor=tuple(predecessor),
        convergence_id=convergence,
        divergence_id=divergence,
        branch_heads=(heads[0], heads[1]),
        branch_tails=(tails[0], tails[1]),
    )
    _check_wiring(topology)
    return topology


def _check_wiring(topology: LineTopology) -> None:
    """Assert the junction-graph invariants (cheap; runs at build time)."""
    n = len(topology.segments)
    # Successor/predecessor maps are mutually inverse where defined.
    for j in range(n):
        s = topology.successor[j]
        if s is not None:
            assert topology.predecessor[s] == j, f"wiring mismatch at {j}->{s}"
        p = topology.predecessor[j]
        if p is not None:
            assert topology.successor[p] == j, f"wiring mismatch at {p}->{j}"
    # Resolving the junction one way per branch yields two simple cycles
    # that each visit every central segment once.
    for b, branch in enumerate((Part.BRANCH1, Part.BRANCH2)):
        seen = set()
        j = topology.convergence_id
        while j not in seen:
            seen.add(j)
            if j == topology.divergence_id:
                j = topology.branch_heads[b]
            elif j == topology.branch_tails[b]:
                j = topology.convergence_id
            else:
                nxt = topology.successor[j]
                assert nxt is not None
                j = nxt
        expected = set(topology.circuit_ids(branch))
        assert seen == expected, f"circuit through {branch.value} is not simple"


def capacity(topology: LineTopology) -> int:
    """Maximum train count: one per segment."""
    return len(topology.segments)


def _even_spacing(path: tuple[int, ...], count: int) -> list[int]:
    """Place ``count`` trains on ``path`` with maximal minimum gap.

    Uses positions floor(i * n / count), which spreads the trains with gap
    differences of at most one segment and ties resolved toward lower index.
    """
    n = len(path)
    return [path[(i * n) // count] for i in range(count)]


def _first_branch_rule(topology: LineTopology, occupancy: tuple[int, ...]) -> Part:
    """First merging branch: the one whose lead train is nearest the convergence.

    With no branch trains at all the first merger is the first dispatched
    train, which by the dispatch rule goes to branch 1.
    """
    best: tuple[int, int] | None = None  # (distance, branch index)
    for b, branch in enumerate((Part.BRANCH1, Part.BRANCH2)):
        path = topology.branch_path_ids(branch)
        occupied = [pos for pos, seg_id in enumerate(path) if occupancy[seg_id]]
        if occupied:
            dist = len(path) - 1 - max(occupied)
            if best is None or (dist, b) < best:
                best = (dist, b)
    if best is None:
        return Part.BRANCH1
    return Part.BRANCH1 if best[1] == 0 else Part.BRANCH2


def make_configuration(
    topology: LineTopology,
    occupancy: tuple[int, ...] | list[int],
    first_branch: Part | None = None,
) -> TrainConfiguration:
    """Wrap a raw occupancy vector, deriving counts and the alternation seed."""
    occ = tuple(int(b) for b in occupancy)
    if len(occ) != len(topology.segments):
        raise InfeasibleSeed(
            f"occupancy has {len(occ)} entries for {len(topology.segments)} segments"
        )
    if any(b not in (0, 1) for b in occ):
        raise InfeasibleSeed("occupancy entries must be 0 or 1")
    m1 = sum(occ[j] for j in topology.part_ids(Part.BRANCH1))
    m2 = sum(occ[j] for j in topology.part_ids(Part.BRANCH2))
    if first_branch is None:
        first_branch = _first_branch_rule(topology, occ)
    return TrainConfiguration(
        occupancy=occ,
        first_branch=first_branch,
        m=sum(occ),
        m1=m1,
        m2=m2,
        dm=m2 - m1,
    )


def seed_trains(topology: LineTopology, m: int, dm: int) -> TrainConfiguration:
    """Deterministic initial placement realizing (m, dm).

    The branch total is chosen as close as possible to the capacity-
    proportional share (ties toward fewer branch trains), subject to parity
    with dm and per-part capacities; trains are then evenly spaced along each
    part in travel order.
    """
    cap = capacity(topology)
    if not 0 <= m <= cap:
        raise InfeasibleSeed(f"m={m} outside [0, {cap}]")
    cap_c = len(topology.part_ids(Part.CENTRAL))
    cap_b1 = len(topology.part_ids(Part.BRANCH1))
    cap_b2 = len(topology.part_ids(Part.BRANCH2))

    target = m * (cap_b1 + cap_b2) / cap
    best_mb: int | None = None
    for mb in range(abs(dm), min(cap_b1 + cap_b2, m) + 1):
        if (mb - dm) % 2 != 0:
            continue
        b1 = (mb - dm) // 2
        b2 = (mb + dm) // 2
        if not (0 <= b1 <= cap_b1 and 0 <= b2 <= cap_b2):
            continue
        if m - mb > cap_c:
            continue
        if best_mb is None or (abs(mb - target), mb) < (abs(best_mb - target), best_mb):
            best_mb = mb
    if best_mb is None:
        raise InfeasibleSeed(
            f"no placement realizes m={m}, dm={dm} "
            f"(capacities: central {cap_c}, branches {cap_b1}/{cap_b2})"
        )

    mb = best_mb
    mc = m - mb
    b1 = (mb - dm) // 2
    b2 = (mb + dm) // 2

    occ = [0] * cap
    # Travel order within each part: outbound chain then inbound chain, which
    # is exactly the id order produced by build_line.
    if mc:
        for seg_id in _even_spacing(topology.part_ids(Part.CENTRAL), mc):
            occ[seg_id] = 1
    if b1:
        for seg_id in _even_spacing(topology.part_ids(Part.BRANCH1), b1):
            occ[seg_id] = 1
    if b2:
        for seg_id in _even_spacing(topology.part_ids(Part.BRANCH2), b2):
            occ[seg_id] = 1
    assert sum(occ) == m
    return make_configuration(topology, occ)


def junction_offsets(topology: LineTopology, config: TrainConfiguration) -> tuple[int, int]:
    """Alternation offsets (sigma1, tau1) derived from the configuration.

    sigma1 = 0 iff branch 1 provides the first merging train; tau1 = 0 iff
    branch 1 receives the first dispatched train.  Requiring every train to
    return to the branch circuit it belongs to (train conservation per
    branch) forces the dispatch offset to equal the merge offset shifted by
    the parity of the central train count; with no branch trains the first
    dispatched train is also the first merger, so the offsets coincide.
    """
    sigma1 = 0 if config.first_branch is Part.BRANCH1 else 1
    mc = config.m - config.m1 - config.m2
    if config.m1 + config.m2 == 0:
        tau1 = sigma1
    else:
        tau1 = (sigma1 + mc) % 2
    return sigma1, tau1


def circuit_populations(
    topology: LineTopology, config: TrainConfiguration
) -> tuple[int, int, bool]:
    """Train count per branch circuit ``(k1, k2)`` and whether circuits are locked.

    Central trains alternate circuit membership along the convergence->
    divergence path: the train nearest the convergence belongs to the circuit
    of the branch that merges second, the next one to the first-merging
    branch, and so on.  ``locked`` is False only for the odd central-only
    seeds, where a single alternating tour serves both branches and no
    per-circuit population exists (k1/k2 then split the total evenly).
    """
    mc = config.m - config.m1 - config.m2
    first = config.first_branch
    n_first = mc // 2
    n_other = mc - n_first
    if first is Part.BRANCH1:
        k1, k2 = config.m1 + n_first, config.m2 + n_other
    else:
        k1, k2 = config.m1 + n_other, config.m2 + n_first
    locked = (config.m1 + config.m2 > 0) or (mc % 2 == 0)
    if not locked:
        k1 = k2 = config.m // 2  # descriptive only; the tour is shared
    return k1, k2, locked


def desk_line(
    lam_central: float = 0.0,
    lam_branch1: float = 0.0,
    lam_branch2: float = 0.0,
    alpha: float = 1.0,
    min_dwell: float = 10.0,
    max_dwell: float = 40.0,
    run_time: float = 60.0,
    min_run_time: float = 45.0,
    safe_separation: float = 30.0,
) -> dict:
    """Description of the 12-segment desk instance.

    Central part: 4 segments per direction with platforms on the 2nd and 3rd;
    branches: 1 segment per direction, each with a platform.  All run,
    minimum-run and separation times are uniform.
    """

    def seg(platform_lambda: float | None) -> dict:
        d: dict = {
            "run_time": run_time,
            "min_run_time": min_run_time,
            "safe_separation": safe_separation,
        }
        if platform_lambda is not None:
            d["platform"] = {
                "lambda": platform_lambda,
                "alpha": alpha,
                "min_dwell": min_dwell,
                "max_dwell": max_dwell,
            }
        return d

    def central_direction() -> list[dict]:
        return [seg(None), seg(lam_central), seg(lam_central), seg(None)]

    def branch_direction(lam: float) -> list[dict]:
        return [seg(lam)]

    return {
        "central": {"outbound": central_direction(), "inbound": central_direction()},
        "branch1": {
            "outbound": branch_direction(lam_branch1),
            "inbound": branch_direction(lam_branch1),
        },
        "branch2": {
            "outbound": branch_direction(lam_branch2),
            "inbound": branch_direction(lam_branch2),
        },
    }


def build_desk_line(**kwargs) -> LineTopology:
    """Convenience wrapper: the validated desk instance topology."""
    return build_line(desk_line(**kwargs))


def desk_phase_line() -> LineTopology:
    """Desk instance setting whose default sweep shows all eight phases.

    Zero passenger demand, the stock 15 s run margins and the [10, 40] s
    dwell window: sweeping every feasible (m, dm) yields exactly the labels
    {Ia, Ib, IIa, IIb, IIIa, IIIb, IVa, IVb}.
    """
    return build_desk_line()


def desk_demand_line() -> LineTopology:
    """Desk instance with light, symmetric passenger demand.

    Every platform gets arrival/exchange ratio 0.02 — small enough that
    free flow stays forward-dominated (no dwell platooning), large enough
    that scaling demand up on branch 2 and the central part breaks the
    free-flow ties and shifts the AG boundary by a full grid cell, while
    the JD boundary (set by hole counts, not demand) stays put.
    """
    return build_desk_line(
        lam_central=0.2, lam_branch1=0.2, lam_branch2=0.2, alpha=10.0
    )


__all__ = [
    "Part",
    "Direction",
    "PlatformParams",
    "Segment",
    "LineTopology",
    "TrainConfiguration",
    "build_line",
    "capacity",
    "seed_trains",
    "make_configuration",
    "junction_offsets",
    "circuit_populations",
    "desk_line",
    "build_desk_line",
    "desk_phase_line",
    "desk_demand_line",
]
