"""Steady-state traffic analysis.

Estimates the asymptotic departure growth rate (average headway) from a
:class:`~junctionsim.engine.DepartureTable`, classifies the eight traffic
phases from the binding-constraint census, sweeps the (m, dm) train-count
plane, and extracts the two phase boundaries:

* ``AG`` separates the two free-flow phases (demand-sensitive),
* ``JD`` separates the two congested phases (demand-invariant).

Frequencies are stored in trains/second; CSV exports use trains/hour.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .control import ControlParams, DemandProfile, control_params
from .engine import DepartureTable, simulate
from .errors import (
    ConfigError,
    Deadlock,
    GridMismatch,
    InsufficientData,
    JunctionSimError,
    MissingRegion,
    Unclassifiable,
)
from .topology import (
    LineTopology,
    Part,
    TrainConfiguration,
    capacity,
    seed_trains,
)

# Binding-census constraint families.  The kernel's per-event codes are
#   0 forward (plain link)   2 forward (through the junction)
#   1 backward (plain link)  3 backward (through the junction)
# Forward progression through a junction is ordinary movement, so codes 0 and
# 2 share a family; a backward hold *through* the junction is the alternation
# discipline at work and forms its own family.
FORWARD = "forward"
BACKWARD = "backward"
JUNCTION = "junction"
FAMILIES = (FORWARD, BACKWARD, JUNCTION)
_CODE_FAMILY = (FORWARD, BACKWARD, FORWARD, JUNCTION)

#: Periods probed by the tail-periodicity growth estimator.
_MAX_PERIOD = 128
#: Minimum usable samples per segment after the transient cut.
_MIN_TAIL = 4


class PhaseLabel(str, Enum):
    """The eight traffic phases of the (m, dm) plane."""

    IA = "Ia"
    IB = "Ib"
    IIA = "IIa"
    IIB = "IIb"
    IIIA = "IIIa"
    IIIB = "IIIb"
    IVA = "IVa"
    IVB = "IVb"


@dataclass(frozen=True)
class GrowthRateEstimate:
    """Asymptotic average headway per part.

    ``h0`` is the central-part headway (seconds between consecutive
    departures at a fixed central segment), ``h1``/``h2`` the branch
    headways, and ``f0 = 1/h0`` the central frequency in trains/second.
    ``residual`` is the worst per-segment deviation from its part mean;
    ``converged`` requires that deviation to be below ``tolerance * h`` for
    every part.  ``per_segment`` holds the raw per-segment slopes.
    """

    h0: float
    h1: float
    h2: float
    f0: float
    converged: bool
    residual: float
    per_segment: tuple[float, ...]
    method: str

    def headway(self, part: Part | str) -> float:
        key = part.value if isinstance(part, Part) else part
        return {"central": self.h0, "branch1": self.h1, "branch2": self.h2}[key]


@dataclass(frozen=True)
class BindingCensus:
    """Per-segment constraint-family activity over the steady window.

    ``majority[j]`` is the family most often binding at segment ``j``;
    ``shares[j]`` are the (forward, backward, junction) event fractions;
    ``junction_events`` counts junction-family events summed over each
    branch's segments — the circuit that waits at the junction accumulates
    them, so the *smaller* count marks the rate-limiting circuit.
    """

    majority: tuple[str, ...]
    shares: tuple[tuple[float, float, float], ...]
    junction_events: tuple[int, int]
    window_counts: tuple[int, ...]

    def segment_share(self, segment_id: int, family: str) -> float:
        return self.shares[segment_id][FAMILIES.index(family)]


@dataclass(frozen=True)
class GridPoint:
    """One classified point of the sweep grid."""

    m: int
    dm: int
    estimate: GrowthRateEstimate
    label: PhaseLabel


@dataclass(frozen=True)
class Boundary:
    """A phase boundary: grid-edge midpoints plus a straight-line fit.

    ``points`` are ``(m, dm)`` midpoints of grid edges whose endpoints carry
    the two labels the boundary separates.  The linear fit ``dm = slope*m +
    intercept`` is reported with its R²; the polyline is the ground truth.
    """

    name: str
    points: tuple[tuple[int, float], ...]
    slope: float
    intercept: float
    r_squared: float

    def midpoint_at(self, m: int) -> float | None:
        for mm, mid in self.points:
            if mm == m:
                return mid
        return None


@dataclass
class PhaseDiagram:
    """Sweep result: per-(m, dm) estimates and labels plus boundaries.

    ``grid`` covers the feasible points that simulated and classified;
    ``failures`` records per-point errors without aborting the sweep;
    ``infeasible`` lists the (m, dm) pairs no seeding realizes.
    """

    grid: dict[tuple[int, int], GridPoint]
    failures: dict[tuple[int, int], str]
    infeasible: tuple[tuple[int, int], ...]
    boundaries: dict[str, Boundary] | None = None
    meta: dict = field(default_factory=dict)

    def label_at(self, m: int, dm: int) -> PhaseLabel | None:
        point = self.grid.get((m, dm))
        return None if point is None else point.label

    def labels_present(self) -> frozenset[PhaseLabel]:
        return frozenset(p.label for p in self.grid.values())


@dataclass(frozen=True)
class ScenarioDiff:
    """Point-wise and boundary-wise difference between two diagrams."""

    frequency_delta: dict[tuple[int, int], float]
    max_abs_frequency_delta: float
    boundary_displacement: dict[str, float | None]
    moved: tuple[str, ...]


# ---------------------------------------------------------------------------
# growth-rate estimation
# ---------------------------------------------------------------------------


def _tail_slope(window: np.ndarray) -> tuple[float, str]:
    """Per-count growth of one departure sequence.

    The settled regime is periodic in the count index, so the increment over
    one period is constant; probing periods from short to long finds it and
    yields the growth to float accuracy.  When no exact period fits in the
    window (slowly converging controls), fall back to a least-squares slope.
    """
    n = len(window)
    mean_step = abs(float(window[-1] - window[0])) / max(1, n - 1)
    atol = 1e-9 * max(1.0, mean_step)
    max_period = min(_MAX_PERIOD, (n - 1) // 3)
    for period in range(1, max_period + 1):
        gaps = window[period:] - window[:-period]
        if float(np.max(gaps) - np.min(gaps)) <= atol:
            return float(window[-1] - window[-1 - period]) / period, "periodic"
    k = np.arange(n, dtype=np.float64)
    slope = float(np.polyfit(k, np.asarray(window, dtype=np.float64), 1)[0])
    return slope, "least-squares"


def _zero_frequency_estimate(n_segments: int, method: str) -> GrowthRateEstimate:
    inf = math.inf
    return GrowthRateEstimate(
        h0=inf,
        h1=inf,
        h2=inf,
        f0=0.0,
        converged=True,
        residual=0.0,
        per_segment=(inf,) * n_segments,
        method=method,
    )


def growth_rate(
    table: DepartureTable,
    transient_fraction: float = 0.3,
    tolerance: float = 1e-6,
) -> GrowthRateEstimate:
    """Estimate the asymptotic average headway per part from a table.

    The leading ``transient_fraction`` of each segment's departures is
    discarded; the remainder is fed to the tail-periodicity estimator.  Part
    headways are the means over the part's segments, and the estimate is
    converged when every segment agrees with its part mean to within
    ``tolerance`` (relative).  An empty table (no trains) reports zero
    frequency by convention.
    """
    if not 0.0 <= transient_fraction < 1.0:
        raise ConfigError(
            f"transient_fraction must lie in [0, 1), got {transient_fraction}"
        )
    n = table.n_segments
    if all(c == 0 for c in table.counts):
        return _zero_frequency_estimate(n, "empty")

    slopes = [0.0] * n
    methods = set()
    for j in range(n):
        d = np.asarray(table.departures[j], dtype=np.float64)
        cut = int(math.floor(transient_fraction * len(d)))
        window = d[cut:]
        if len(window) < _MIN_TAIL:
            raise InsufficientData(
                f"segment {j}: {len(window)} departures after the transient cut;"
                f" need at least {_MIN_TAIL} (raise counts or lower the cut)"
            )
        slopes[j], how = _tail_slope(window)
        methods.add(how)

    part_mean: dict[str, float] = {}
    residual = 0.0
    converged = True
    for part in (Part.CENTRAL, Part.BRANCH1, Part.BRANCH2):
        ids = [j for j in range(n) if table.parts[j] == part.value]
        mean = sum(slopes[j] for j in ids) / len(ids)
        part_mean[part.value] = mean
        deviation = max(abs(slopes[j] - mean) for j in ids)
        residual = max(residual, deviation)
        if deviation > tolerance * abs(mean):
            converged = False

    h0 = part_mean[Part.CENTRAL.value]
    method = methods.pop() if len(methods) == 1 else "mixed"
    return GrowthRateEstimate(
        h0=h0,
        h1=part_mean[Part.BRANCH1.value],
        h2=part_mean[Part.BRANCH2.value],
        f0=0.0 if not math.isfinite(h0) or h0 <= 0.0 else 1.0 / h0,
        converged=converged,
        residual=residual,
        per_segment=tuple(slopes),
        method=method,
    )


# ---------------------------------------------------------------------------
# binding census
# ---------------------------------------------------------------------------


def binding_census(
    table: DepartureTable,
    topology: LineTopology,
    transient_fraction: float = 0.3,
) -> BindingCensus:
    """Summarize which constraint family binds where over the steady window."""
    if not 0.0 <= transient_fraction < 1.0:
        raise ConfigError(
            f"transient_fraction must lie in [0, 1), got {transient_fraction}"
        )
    n = table.n_segments
    majority: list[str] = []
    shares: list[tuple[float, float, float]] = []
    window_counts: list[int] = []
    family_counts = np.zeros((n, 3), dtype=np.int64)
    for j in range(n):
        codes = np.asarray(table.bindings[j])
        cut = int(math.floor(transient_fraction * len(codes)))
        tail = codes[cut:]
        window_counts.append(len(tail))
        if len(tail) == 0:
            majority.append(FORWARD)
            shares.append((0.0, 0.0, 0.0))
            continue
        per_code = np.bincount(tail, minlength=4)
        counts = (
            int(per_code[0] + per_code[2]),  # forward
            int(per_code[1]),                # backward
            int(per_code[3]),                # junction
        )
        family_counts[j] = counts
        total = len(tail)
        shares.append(tuple(c / total for c in counts))
        # Deterministic tie-break: forward, then backward, then junction.
        majority.append(FAMILIES[int(np.argmax(counts))])

    junction_events = []
    for branch in (Part.BRANCH1, Part.BRANCH2):
        ids = topology.part_ids(branch)
        junction_events.append(int(sum(family_counts[j][2] for j in ids)))

    return BindingCensus(
        majority=tuple(majority),
        shares=tuple(shares),
        junction_events=(junction_events[0], junction_events[1]),
        window_counts=tuple(window_counts),
    )


# ---------------------------------------------------------------------------
# capacity plateau
# ---------------------------------------------------------------------------


def _steady_dwell(ratio: float, wmin: float, wmax: float, local_h: float) -> float:
    # Self-consistent dwell at a constant local headway: w = ratio*(h - w).
    w = 0.0 if ratio <= 0.0 else ratio / (1.0 + ratio) * local_h
    return min(max(w, wmin), wmax)


def capacity_headway(
    topology: LineTopology,
    demand: DemandProfile | None = None,
    controls: ControlParams | None = None,
    max_iters: int = 200,
) -> tuple[float, int]:
    """Central-headway floor set by run, dwell and separation times.

    At a constant service headway every segment enforces
    ``h_local >= run_eff + dwell + separation``; branch segments see twice
    the central headway, so their floors count half.  Dwells respond to the
    headway and saturate at the maximum, and upstream dwell extensions
    compress downstream runs no further than the minimum run time.  The
    fixed point of ``h -> max_j floor_j(h)`` is the plateau headway of the
    maximum-frequency phase; the returned segment id marks the bottleneck.
    """
    if demand is None:
        demand = DemandProfile()
    if controls is None:
        controls = control_params(topology, demand)

    segs = topology.segments
    central = set(topology.part_ids(Part.CENTRAL))
    # Travel-order walk used to propagate dwell extensions: central path,
    # then each branch path; the convergence segment inherits the larger
    # tail extension, the heads inherit the divergence's.
    central_path = topology.central_path_ids()
    walk = (
        list(central_path)
        + list(topology.branch_path_ids(Part.BRANCH1))
        + list(topology.branch_path_ids(Part.BRANCH2))
    )
    tails = topology.branch_tails
    heads = set(topology.branch_heads)

    h = 0.0
    bottleneck = central_path[0]
    for _ in range(max_iters):
        # Pass 1: steady dwells and extensions at headway h.
        dwell = [0.0] * len(segs)
        ext_out = [0.0] * len(segs)
        run_eff = [s.nominal_run_time for s in segs]
        for _sweep in range(2):  # second pass settles the tails->conv wrap
            for j in walk:
                seg = segs[j]
                if j == central_path[0]:
                    ext_in = max(ext_out[tails[0]], ext_out[tails[1]])
                elif j in heads:
                    ext_in = ext_out[topology.divergence_id]
                else:
                    ext_in = ext_out[topology.predecessor[j]]
                run = seg.nominal_run_time
                resid = 0.0
                if ext_in > 0.0:
                    run = max(seg.min_run_time, seg.nominal_run_time - ext_in)
                    resid = ext_in - (seg.nominal_run_time - run)
                run_eff[j] = run
                if seg.platform is not None:
                    local_h = h if j in central else 2.0 * h
                    w = _steady_dwell(
                        controls.ratio[j],
                        controls.min_dwell[j],
                        controls.max_dwell[j],
                        local_h,
                    )
                    dwell[j] = w
                    ext_out[j] = max(0.0, w - controls.nominal_dwell[j])
                else:
                    ext_out[j] = resid
        # Pass 2: tightest per-segment floor.
        h_next = 0.0
        for j, seg in enumerate(segs):
            floor = run_eff[j] + dwell[j] + seg.safe_separation_time
            if j not in central:
                floor *= 0.5
            if floor > h_next:
                h_next = floor
                bottleneck = j
        if abs(h_next - h) <= 1e-12 * max(1.0, h_next):
            return h_next, bottleneck
        h = h_next
    return h, bottleneck


def _steady_circuit_time(
    topology: LineTopology,
    controls: ControlParams,
    branch: Part,
    estimate: GrowthRateEstimate,
) -> float:
    """Lap time of one branch circuit with dwells settled at the measured headways."""
    total = 0.0
    h_branch = estimate.headway(branch)
    for j in topology.circuit_ids(branch):
        seg = topology.segments[j]
        total += seg.nominal_run_time
        if seg.platform is not None:
            local_h = estimate.h0 if seg.part is Part.CENTRAL else h_branch
            total += _steady_dwell(
                controls.ratio[j],
                controls.min_dwell[j],
                controls.max_dwell[j],
                local_h,
            )
    return total


# ---------------------------------------------------------------------------
# phase classification
# ---------------------------------------------------------------------------


def _majority_fraction(
    census: BindingCensus, ids: tuple[int, ...], families: frozenset[str]
) -> float:
    hits = sum(1 for j in ids if census.majority[j] in families)
    return hits / len(ids)


_FWD_ONLY = frozenset({FORWARD})
_SAFETY_SIDE = frozenset({BACKWARD, JUNCTION})


def classify_phase(
    estimate: GrowthRateEstimate,
    binding: BindingCensus,
    m: int,
    dm: int,
    topology: LineTopology,
    *,
    demand: DemandProfile | None = None,
    controls: ControlParams | None = None,
    config: TrainConfiguration | None = None,
    theta: float = 0.9,
    plateau_rtol: float = 1e-3,
) -> PhaseLabel:
    """Assign one of the eight traffic phases to a converged grid point.

    Order of tests: zero frequency (IVa), capacity plateau (IVb), then the
    circuit-level census — free flow (I) when forward constraints dominate
    both branch circuits, congested (III) when safety-side constraints
    dominate both, unbalanced (II) when one circuit is forward-bound while
    the other branch queues at the junction.  The a/b side names the
    rate-limiting circuit: 'a' when circuit 1 (branch 1 + central) sets the
    pace, 'b' for circuit 2; exact ties go to 'a'.

    In free flow the side is decided analytically: circuit u carries
    k_u = m_u + m_c/2 trains (central trains split evenly between the two
    interleaved circuits), so its service rate limit is T_u / k_u with T_u
    the circuit lap time at settled dwells.  This comparison depends only
    on the train counts and the demand profile, never on where along the
    circuit the trains were initially placed, and it responds continuously
    to demand imbalance between the branches — the measured census cannot,
    because the slack circuit's tail binds at the junction on every lap
    regardless of how slack it is.
    """
    if not estimate.converged:
        raise Unclassifiable(
            f"estimate not converged (residual {estimate.residual:.3g}); "
            "classification needs a settled steady state"
        )
    if estimate.f0 == 0.0:
        return PhaseLabel.IVA

    if controls is None:
        controls = control_params(topology, demand)

    # Maximum-frequency plateau: the headway sits on the capacity floor and
    # safety holds somewhere in the bottleneck's part.  (The floor is often
    # flat across the whole part, so the binding hole can sit at any of its
    # segments, not just at the nominal argmax.)
    h_cap, bottleneck = capacity_headway(topology, demand, controls)
    if h_cap > 0.0 and abs(estimate.h0 - h_cap) <= plateau_rtol * h_cap:
        part_ids = topology.part_ids(topology.segments[bottleneck].part)
        if any(binding.majority[q] in _SAFETY_SIDE for q in part_ids):
            return PhaseLabel.IVB

    c1_ids = topology.circuit_ids(Part.BRANCH1)
    c2_ids = topology.circuit_ids(Part.BRANCH2)
    fwd1 = _majority_fraction(binding, c1_ids, _FWD_ONLY) >= theta
    fwd2 = _majority_fraction(binding, c2_ids, _FWD_ONLY) >= theta
    safe1 = _majority_fraction(binding, c1_ids, _SAFETY_SIDE) >= theta
    safe2 = _majority_fraction(binding, c2_ids, _SAFETY_SIDE) >= theta

    if config is None:
        config = seed_trains(topology, m, dm)
    mc = config.m - config.m1 - config.m2

    if fwd1 and fwd2:
        # Free flow: the slower circuit (higher lap time per train) limits.
        k1 = config.m1 + mc / 2.0
        k2 = config.m2 + mc / 2.0
        t1 = _steady_circuit_time(topology, controls, Part.BRANCH1, estimate)
        t2 = _steady_circuit_time(topology, controls, Part.BRANCH2, estimate)
        r1 = math.inf if k1 <= 0.0 else t1 / k1
        r2 = math.inf if k2 <= 0.0 else t2 / k2
        return PhaseLabel.IA if r1 >= r2 else PhaseLabel.IB

    if safe1 and safe2:
        # Congestion: holes circulate backward; the circuit with fewer
        # holes per unit separation is the limiter.  Central holes are
        # shared evenly between the circuits.
        n_c = len(topology.part_ids(Part.CENTRAL))
        s_c = sum(topology.segments[j].safe_separation_time for j in topology.part_ids(Part.CENTRAL))
        ratios = []
        for part, m_u in ((Part.BRANCH1, config.m1), (Part.BRANCH2, config.m2)):
            ids = topology.part_ids(part)
            s_u = s_c + sum(topology.segments[j].safe_separation_time for j in ids)
            holes = (len(ids) - m_u) + (n_c - mc) / 2.0
            ratios.append(math.inf if holes <= 0.0 else s_u / holes)
        return PhaseLabel.IIIA if ratios[0] >= ratios[1] else PhaseLabel.IIIB

    # Unbalanced branches: the forward-bound side is judged on the branch
    # alone (the shared central may carry congestion waves from the loaded
    # side without the free branch being at fault).
    tail1, tail2 = topology.branch_tails
    fwd_b1 = _majority_fraction(binding, topology.part_ids(Part.BRANCH1), _FWD_ONLY) >= theta
    fwd_b2 = _majority_fraction(binding, topology.part_ids(Part.BRANCH2), _FWD_ONLY) >= theta
    if fwd_b1 and binding.majority[tail2] == JUNCTION:
        return PhaseLabel.IIA
    if fwd_b2 and binding.majority[tail1] == JUNCTION:
        return PhaseLabel.IIB

    detail = ", ".join(
        f"{part.value}=" + "/".join(binding.majority[j] for j in topology.part_ids(part))
        for part in (Part.BRANCH1, Part.BRANCH2)
    )
    raise Unclassifiable(
        f"mixed binding census at (m={m}, dm={dm}): {detail}; "
        f"no family reaches the domination threshold {theta}"
    )


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def feasible_grid(
    topology: LineTopology,
    m_range=None,
    dm_range=None,
) -> tuple[tuple[int, int], ...]:
    """All (m, dm) pairs the deterministic seeding can realize."""
    cap = capacity(topology)
    if m_range is None:
        m_range = range(0, cap + 1)
    points = []
    for m in m_range:
        dms = dm_range if dm_range is not None else range(-m, m + 1)
        for dm in dms:
            try:
                seed_trains(topology, m, dm)
            except JunctionSimError:
                continue
            points.append((int(m), int(dm)))
    return tuple(sorted(set(points)))


def _sweep_point(args) -> tuple[tuple[int, int], GridPoint | None, str | None]:
    (
        topology,
        m,
        dm,
        demand,
        controls,
        counts,
        transient_fraction,
        theta,
        plateau_rtol,
        backend,
    ) = args
    key = (m, dm)
    config = seed_trains(topology, m, dm)
    try:
        table = simulate(
            topology, config, demand, controls, counts=counts, backend=backend
        )
    except Deadlock:
        estimate = _zero_frequency_estimate(len(topology.segments), "deadlock")
        return key, GridPoint(m, dm, estimate, PhaseLabel.IVA), None
    except JunctionSimError as exc:
        return key, None, f"{type(exc).__name__}: {exc}"
    try:
        estimate = growth_rate(table, transient_fraction)
        census = binding_census(table, topology, transient_fraction)
        label = classify_phase(
            estimate,
            census,
            m,
            dm,
            topology,
            demand=demand,
            controls=controls,
            config=config,
            theta=theta,
            plateau_rtol=plateau_rtol,
        )
    except JunctionSimError as exc:
        return key, None, f"{type(exc).__name__}: {exc}"
    return key, GridPoint(m, dm, estimate, label), None


def sweep(
    topology: LineTopology,
    demand: DemandProfile | None = None,
    controls: ControlParams | None = None,
    m_range=None,
    dm_range=None,
    *,
    counts: int = 500,
    transient_fraction: float = 0.3,
    theta: float = 0.9,
    plateau_rtol: float = 1e-3,
    parallel: int | None = None,
    backend: str | None = None,
) -> PhaseDiagram:
    """Simulate and classify every feasible (m, dm) grid point.

    Points are independent, so ``parallel`` > 1 distributes them over
    worker processes; assembly is a deterministic reduction keyed by
    (m, dm).  Per-point errors are recorded in ``failures`` without
    aborting; structural deadlocks classify as IVa (zero frequency).
    """
    if demand is None:
        demand = DemandProfile()
    if controls is None:
        controls = control_params(topology, demand)

    points = feasible_grid(topology, m_range, dm_range)
    if not points:
        raise ConfigError("the requested (m, dm) ranges contain no feasible point")
    requested = set()
    ms = m_range if m_range is not None else range(0, capacity(topology) + 1)
    for m in ms:
        dms = dm_range if dm_range is not None else range(-m, m + 1)
        requested.update((int(m), int(dm)) for dm in dms)
    infeasible = tuple(sorted(requested - set(points)))

    tasks = [
        (
            topology,
            m,
            dm,
            demand,
            controls,
            counts,
            transient_fraction,
            theta,
            plateau_rtol,
            backend,
        )
        for (m, dm) in points
    ]
    if parallel is not None and parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]

    grid: dict[tuple[int, int], GridPoint] = {}
    failures: dict[tuple[int, int], str] = {}
    for key, point, error in sorted(results, key=lambda r: r[0]):
        if point is not None:
            grid[key] = point
        else:
            failures[key] = error

    h_cap, bottleneck = capacity_headway(topology, demand, controls)
    diagram = PhaseDiagram(
        grid=grid,
        failures=failures,
        infeasible=infeasible,
        meta={
            "counts": counts,
            "transient_fraction": transient_fraction,
            "theta": theta,
            "plateau_rtol": plateau_rtol,
            "plateau_headway_s": h_cap,
            "plateau_bottleneck": bottleneck,
            "capacity": capacity(topology),
        },
    )
    try:
        extract_boundaries(diagram)
    except MissingRegion:
        diagram.boundaries = None
    return diagram


# ---------------------------------------------------------------------------
# boundaries and scenario comparison
# ---------------------------------------------------------------------------


def _fit_line(points: list[tuple[int, float]]) -> tuple[float, float, float]:
    if len(points) == 1:
        return 0.0, points[0][1], 1.0
    ms = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    slope, intercept = np.polyfit(ms, ys, 1)
    pred = slope * ms + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def _boundary_between(
    diagram: PhaseDiagram, name: str, side_a: PhaseLabel, side_b: PhaseLabel
) -> Boundary:
    present = diagram.labels_present()
    for needed in (side_a, side_b):
        if needed not in present:
            raise MissingRegion(
                f"boundary {name} needs phase {needed.value}, absent from the diagram"
            )
    columns: dict[int, list[float]] = {}
    by_m: dict[int, list[tuple[int, PhaseLabel]]] = {}
    for (m, dm), point in diagram.grid.items():
        by_m.setdefault(m, []).append((dm, point.label))
    for m, rows in by_m.items():
        rows.sort()
        for (dm_lo, lab_lo), (dm_hi, lab_hi) in zip(rows, rows[1:]):
            if {lab_lo, lab_hi} == {side_a, side_b}:
                columns.setdefault(m, []).append((dm_lo + dm_hi) / 2.0)
    if not columns:
        raise MissingRegion(
            f"boundary {name}: phases {side_a.value} and {side_b.value} are "
            "never grid-adjacent"
        )
    points = [(m, sum(mids) / len(mids)) for m, mids in sorted(columns.items())]
    slope, intercept, r2 = _fit_line(points)
    return Boundary(
        name=name,
        points=tuple(points),
        slope=slope,
        intercept=intercept,
        r_squared=r2,
    )


def extract_boundaries(diagram: PhaseDiagram) -> tuple[Boundary, Boundary]:
    """Locate the AG (Ia|Ib) and JD (IIIa|IIIb) boundaries of a diagram.

    Both free-flow labels and both congested labels must be present.  The
    result is stored on ``diagram.boundaries`` and returned.
    """
    ag = _boundary_between(diagram, "AG", PhaseLabel.IA, PhaseLabel.IB)
    jd = _boundary_between(diagram, "JD", PhaseLabel.IIIA, PhaseLabel.IIIB)
    diagram.boundaries = {"AG": ag, "JD": jd}
    return ag, jd


def _boundaries_of(diagram: PhaseDiagram) -> dict[str, Boundary]:
    if diagram.boundaries is not None:
        return diagram.boundaries
    try:
        ag, jd = extract_boundaries(diagram)
    except MissingRegion:
        return {}
    return {"AG": ag, "JD": jd}


def boundary_displacement(base: Boundary, variant: Boundary) -> float | None:
    """Worst midpoint shift (in dm grid cells) over the shared m columns."""
    common = []
    for m, mid in base.points:
        other = variant.midpoint_at(m)
        if other is not None:
            common.append(abs(other - mid))
    return max(common) if common else None


def compare_scenarios(base: PhaseDiagram, variant: PhaseDiagram) -> ScenarioDiff:
    """Per-point frequency deltas and boundary shifts between two sweeps."""
    base_keys = set(base.grid) | set(base.failures)
    var_keys = set(variant.grid) | set(variant.failures)
    if base_keys != var_keys:
        only_base = sorted(base_keys - var_keys)[:3]
        only_var = sorted(var_keys - base_keys)[:3]
        raise GridMismatch(
            "diagrams cover different (m, dm) grids; "
            f"base-only sample {only_base}, variant-only sample {only_var}"
        )
    delta: dict[tuple[int, int], float] = {}
    for key in sorted(set(base.grid) & set(variant.grid)):
        delta[key] = variant.grid[key].estimate.f0 - base.grid[key].estimate.f0
    max_abs = max((abs(v) for v in delta.values()), default=0.0)

    base_b = _boundaries_of(base)
    var_b = _boundaries_of(variant)
    displacement: dict[str, float | None] = {}
    for name in ("AG", "JD"):
        if name in base_b and name in var_b:
            displacement[name] = boundary_displacement(base_b[name], var_b[name])
        else:
            displacement[name] = None
    moved = tuple(
        name
        for name, shift in displacement.items()
        if shift is not None and shift > 1e-9
    )
    return ScenarioDiff(
        frequency_delta=delta,
        max_abs_frequency_delta=max_abs,
        boundary_displacement=displacement,
        moved=moved,
    )


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.9f}"


def diagram_to_csv(diagram: PhaseDiagram, path) -> None:
    """One row per classified grid point, plot-ready (trains/hour)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "dm", "f0_tph", "h0_s", "phase", "converged"])
        for (m, dm), point in sorted(diagram.grid.items()):
            est = point.estimate
            writer.writerow(
                [
                    m,
                    dm,
                    _fmt(3600.0 * est.f0),
                    _fmt(est.h0),
                    point.label.value,
                    "true" if est.converged else "false",
                ]
            )


def boundaries_to_csv(boundaries, path) -> None:
    """Boundary polylines as (name, m, dm) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "m", "dm"])
        for boundary in boundaries:
            for m, dm in boundary.points:
                writer.writerow([boundary.name, m, f"{dm:.6f}"])


__all__ = [
    "FORWARD",
    "BACKWARD",
    "JUNCTION",
    "FAMILIES",
    "PhaseLabel",
    "GrowthRateEstimate",
    "BindingCensus",
    "GridPoint",
    "Boundary",
    "PhaseDiagram",
    "ScenarioDiff",
    "growth_rate",
    "binding_census",
    "capacity_headway",
    "classify_phase",
    "feasible_grid",
    "sweep",
    "extract_boundaries",
    "boundary_displacement",
    "compare_scenarios",
    "diagram_to_csv",
    "boundaries_to_csv",
]
