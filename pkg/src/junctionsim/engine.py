"""Departure-time dynamics of the junction line.

The state of the line is the table of departure times ``d[j][k]`` (k-th
departure from segment j, counting from 0).  Each entry is the max of a
forward term (the feeding train's departure plus its controlled run time
plus dwell) and a backward term (the previous occupant of the next segment
clearing it plus the safety separation).  At the junction the feeding/.
clearing streams interleave: the convergence segment is fed alternately by
the two branch tails and the divergence segment feeds the two branch heads
alternately, so central counts advance twice per branch count.

Because of that 2:1 interleaving the recursion cannot be evaluated in
lockstep over a global count; instead segments advance independently
whenever their referenced counts are available (see ``_kernel_py``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .control import ControlParams, DemandProfile, control_params
from .errors import ConfigError, Deadlock, NegativeInterval, WindowTooShort
from .kernels import get_kernel
from .topology import (
    LineTopology,
    Part,
    TrainConfiguration,
    junction_offsets,
)
from . import _kernel_py

#: Largest look-back between a departure and any count it references on the
#: same or a neighbouring segment stream (dwell: 1; movement and safety
#: across the junction: up to 3 during transients).
MAX_INDEX_SHIFT = 3

#: Smallest admissible rolling window for streaming evaluation.
MIN_WINDOW = MAX_INDEX_SHIFT + 1

#: Extra counts computed beyond the strict target so every cross-stream
#: reference (central streams run at twice the branch rate) stays in range.
_CAP_SLACK = 10


@dataclass(frozen=True)
class DepartureTable:
    """Computed arrival/departure sequences, one row per segment.

    Row ``j`` holds ``counts[j]`` entries; central segments accumulate about
    twice as many counts as branch segments because of the junction
    interleaving.  ``bindings`` holds the per-event binding census codes
    (see ``_kernel_py``).
    """

    k_target: int
    parts: tuple[str, ...]
    counts: tuple[int, ...]
    arrivals: tuple[np.ndarray, ...]
    departures: tuple[np.ndarray, ...]
    extensions: tuple[np.ndarray, ...]
    bindings: tuple[np.ndarray, ...]

    @property
    def n_segments(self) -> int:
        return len(self.parts)

    def validate(self) -> None:
        """Check the structural invariants of a well-formed table."""
        for j in range(self.n_segments):
            d = self.departures[j]
            a = self.arrivals[j]
            if len(d) != self.counts[j] or len(a) != self.counts[j]:
                raise ConfigError(f"segment {j}: ragged table rows")
            if np.any(a > d):
                raise ConfigError(f"segment {j}: arrival after departure")
            if np.any(np.diff(d) <= 0):
                raise ConfigError(f"segment {j}: departures not strictly increasing")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["segment_id", "part", "k", "arrival_s", "departure_s"])
            for j in range(self.n_segments):
                part = self.parts[j]
                a = self.arrivals[j]
                d = self.departures[j]
                for k in range(self.counts[j]):
                    writer.writerow([j, part, k, f"{a[k]:.9f}", f"{d[k]:.9f}"])


def table_prefix_equal(
    a: DepartureTable, b: DepartureTable, k: int | None = None
) -> bool:
    """Exact equality of the first ``k`` counts per segment (common prefix)."""
    if a.n_segments != b.n_segments:
        return False
    for j in range(a.n_segments):
        kj = min(a.counts[j], b.counts[j])
        if k is not None:
            kj = min(kj, k)
        if not np.array_equal(a.departures[j][:kj], b.departures[j][:kj]):
            return False
        if not np.array_equal(a.arrivals[j][:kj], b.arrivals[j][:kj]):
            return False
    return True


@dataclass
class _Prep:
    """Flat-array form of one simulation problem (shared by all engines)."""

    n: int
    k_target: int
    pred: np.ndarray
    succ: np.ndarray
    occupied: np.ndarray
    run_nom: np.ndarray
    run_min: np.ndarray
    sep: np.ndarray
    is_plat: np.ndarray
    ratio: np.ndarray
    wmin: np.ndarray
    wmax: np.ndarray
    wnom: np.ndarray
    conv: int
    div: int
    tails: tuple[int, int]
    heads: tuple[int, int]
    sigma1: int
    tau1: int
    ready: np.ndarray
    cap: np.ndarray
    parts: tuple[str, ...]


def prepare(
    topology: LineTopology,
    config: TrainConfiguration,
    demand: DemandProfile | None = None,
    controls: ControlParams | None = None,
    counts: int = 500,
    initial_offsets: dict[int, float] | None = None,
) -> _Prep:
    """Flatten a simulation problem to the arrays the kernels work on."""
    if counts < 1:
        raise ConfigError(f"counts must be >= 1, got {counts}")
    if controls is None:
        controls = control_params(topology, demand)
    n = len(topology.segments)
    if len(config.occupancy) != n:
        raise ConfigError(
            f"configuration has {len(config.occupancy)} occupancy bits "
            f"for {n} segments"
        )
    pred = np.array(
        [-1 if p is None else p for p in topology.predecessor], dtype=np.int64
    )
    succ = np.array(
        [-1 if s is None else s for s in topology.successor], dtype=np.int64
    )
    occupied = np.array(config.occupancy, dtype=np.int8)
    run_nom = np.array([s.nominal_run_time for s in topology.segments])
    run_min = np.array([s.min_run_time for s in topology.segments])
    sep = np.array([s.safe_separation_time for s in topology.segments])
    is_plat = np.array(
        [1 if s.platform is not None else 0 for s in topology.segments], dtype=np.int8
    )
    ratio = np.array(controls.ratio)
    wmin = np.array(controls.min_dwell)
    wmax = np.array(controls.max_dwell)
    wnom = np.array(controls.nominal_dwell)

    ready = np.zeros(n)
    parked = [j for j in range(n) if config.occupancy[j]]
    for order, j in enumerate(parked):
        ready[j] = controls.initial_offset_step * order
    if initial_offsets:
        for j, t in initial_offsets.items():
            if not 0 <= j < n or not config.occupancy[j]:
                raise ConfigError(
                    f"initial_offsets[{j}]: segment is not initially occupied"
                )
            ready[j] = float(t)
    if np.any(ready < 0):
        raise ConfigError("initial offsets must be >= 0 (times count from 0)")

    central = set(topology.part_ids(Part.CENTRAL))
    cap = np.array(
        [
            2 * counts + _CAP_SLACK if j in central else counts + _CAP_SLACK
            for j in range(n)
        ],
        dtype=np.int64,
    )
    sigma1, tau1 = junction_offsets(topology, config)
    return _Prep(
        n=n,
        k_target=counts,
        pred=pred,
        succ=succ,
        occupied=occupied,
        run_nom=run_nom,
        run_min=run_min,
        sep=sep,
        is_plat=is_plat,
        ratio=ratio,
        wmin=wmin,
        wmax=wmax,
        wnom=wnom,
        conv=topology.convergence_id,
        div=topology.divergence_id,
        tails=topology.branch_tails,
        heads=topology.branch_heads,
        sigma1=sigma1,
        tau1=tau1,
        ready=ready,
        cap=cap,
        parts=tuple(s.part.value for s in topology.segments),
    )


def _empty_table(prep: _Prep) -> DepartureTable:
    empty_f = tuple(np.empty(0) for _ in range(prep.n))
    empty_b = tuple(np.empty(0, dtype=np.int8) for _ in range(prep.n))
    return DepartureTable(
        k_target=prep.k_target,
        parts=prep.parts,
        counts=(0,) * prep.n,
        arrivals=empty_f,
        departures=empty_f,
        extensions=empty_f,
        bindings=empty_b,
    )


def _extract_cycle(blocker: np.ndarray, counts: np.ndarray, k_target: int) -> tuple[int, ...]:
    """Recover a blocking cycle from the wait-for edges left by the kernel."""
    start = -1
    for j in range(len(blocker)):
        if counts[j] < k_target and blocker[j] >= 0:
            start = j
            break
    if start < 0:
        return ()
    seen: dict[int, int] = {}
    chain: list[int] = []
    j = start
    while j >= 0 and j not in seen:
        seen[j] = len(chain)
        chain.append(j)
        j = int(blocker[j])
    if j >= 0:
        return tuple(chain[seen[j] :])
    return tuple(chain)


def _run(prep: _Prep, backend: str | None = None) -> DepartureTable:
    kernel = get_kernel(backend)
    maxcap = int(prep.cap.max())
    dep = np.zeros((prep.n, maxcap))
    arr = np.zeros((prep.n, maxcap))
    ext = np.zeros((prep.n, maxcap))
    bind = np.zeros((prep.n, maxcap), dtype=np.int8)
    counts = np.zeros(prep.n, dtype=np.int64)
    blocker = np.full(prep.n, -1, dtype=np.int64)
    status = kernel.run_recursion(
        prep.n,
        prep.k_target,
        prep.pred,
        prep.succ,
        prep.occupied,
        prep.run_nom,
        prep.run_min,
        prep.sep,
        prep.is_plat,
        prep.ratio,
        prep.wmin,
        prep.wmax,
        prep.wnom,
        prep.conv,
        prep.div,
        prep.tails[0],
        prep.tails[1],
        prep.heads[0],
        prep.heads[1],
        prep.sigma1,
        prep.tau1,
        prep.ready,
        prep.cap,
        dep,
        arr,
        ext,
        bind,
        counts,
        blocker,
    )
    if status == _kernel_py.STATUS_DEADLOCK:
        cycle = _extract_cycle(blocker, counts, prep.k_target)
        raise Deadlock(
            "no train can move: circular blocking among segments "
            f"{list(cycle)}",
            segments=cycle,
        )
    if status == _kernel_py.STATUS_NEGATIVE_INTERVAL:
        raise NegativeInterval("an arrival preceded the previous departure")
    return DepartureTable(
        k_target=prep.k_target,
        parts=prep.parts,
        counts=tuple(int(c) for c in counts),
        arrivals=tuple(arr[j, : counts[j]].copy() for j in range(prep.n)),
        departures=tuple(dep[j, : counts[j]].copy() for j in range(prep.n)),
        extensions=tuple(ext[j, : counts[j]].copy() for j in range(prep.n)),
        bindings=tuple(bind[j, : counts[j]].copy() for j in range(prep.n)),
    )


def simulate(
    topology: LineTopology,
    config: TrainConfiguration,
    demand: DemandProfile | None = None,
    controls: ControlParams | None = None,
    counts: int = 500,
    window: int | None = None,
    initial_offsets: dict[int, float] | None = None,
    backend: str | None = None,
) -> DepartureTable:
    """Run the departure recursion until every segment has ``counts`` counts.

    ``window``, when given, asserts that a rolling evaluation window of that
    many counts per segment would be admissible; the structural requirement
    is ``window >= MIN_WINDOW``.  Raises :class:`Deadlock` (with the
    blocking segment cycle) if the configuration cannot move.
    """
    if window is not None and window < MIN_WINDOW:
        raise WindowTooShort(
            f"window of {window} counts is below the structural minimum "
            f"{MIN_WINDOW} (largest index shift {MAX_INDEX_SHIFT} plus one)"
        )
    prep = prepare(topology, config, demand, controls, counts, initial_offsets)
    if config.m == 0:
        return _empty_table(prep)
    return _run(prep, backend)


class EngineState:
    """Stepwise façade over the recursion: one call = one more count everywhere.

    Arrays are preallocated for ``max_counts`` and filled incrementally, so
    ``step()`` is cheap; ``table()`` snapshots the work done so far.
    """

    def __init__(
        self,
        topology: LineTopology,
        config: TrainConfiguration,
        demand: DemandProfile | None = None,
        controls: ControlParams | None = None,
        max_counts: int = 500,
        window: int | None = None,
        backend: str | None = None,
    ):
        if window is not None and window < MIN_WINDOW:
            raise WindowTooShort(
                f"window of {window} counts is below the structural minimum "
                f"{MIN_WINDOW} (largest index shift {MAX_INDEX_SHIFT} plus one)"
            )
        self._prep = prepare(topology, config, demand, controls, max_counts)
        self._kernel = get_kernel(backend)
        self._m = config.m
        maxcap = int(self._prep.cap.max())
        n = self._prep.n
        self._dep = np.zeros((n, maxcap))
        self._arr = np.zeros((n, maxcap))
        self._ext = np.zeros((n, maxcap))
        self._bind = np.zeros((n, maxcap), dtype=np.int8)
        self._counts = np.zeros(n, dtype=np.int64)
        self._blocker = np.full(n, -1, dtype=np.int64)
        self.reached = 0
        self.max_counts = max_counts

    def step(self) -> int:
        """Advance the per-segment count floor by one; returns the new floor."""
        if self._m == 0:
            raise ConfigError("no trains seeded: the system has no events to step")
        if self.reached >= self.max_counts:
            raise ConfigError(
                f"state was allocated for max_counts={self.max_counts}"
            )
        target = self.reached + 1
        p = self._prep
        status = self._kernel.run_recursion(
            p.n, target, p.pred, p.succ, p.occupied, p.run_nom, p.run_min,
            p.sep, p.is_plat, p.ratio, p.wmin, p.wmax, p.wnom,
            p.conv, p.div, p.tails[0], p.tails[1], p.heads[0], p.heads[1],
            p.sigma1, p.tau1, p.ready, p.cap,
            self._dep, self._arr, self._ext, self._bind,
            self._counts, self._blocker,
        )
        if status == _kernel_py.STATUS_DEADLOCK:
            cycle = _extract_cycle(self._blocker, self._counts, target)
            raise Deadlock(
                "no train can move: circular blocking among segments "
                f"{list(cycle)}",
                segments=cycle,
            )
        if status == _kernel_py.STATUS_NEGATIVE_INTERVAL:
            raise NegativeInterval("an arrival preceded the previous departure")
        self.reached = target
        return self.reached

    def table(self) -> DepartureTable:
        prep = self._prep
        if self._m == 0:
            return _empty_table(prep)
        c = self._counts
        return DepartureTable(
            k_target=self.reached,
            parts=prep.parts,
            counts=tuple(int(x) for x in c),
            arrivals=tuple(self._arr[j, : c[j]].copy() for j in range(prep.n)),
            departures=tuple(self._dep[j, : c[j]].copy() for j in range(prep.n)),
            extensions=tuple(self._ext[j, : c[j]].copy() for j in range(prep.n)),
            bindings=tuple(self._bind[j, : c[j]].copy() for j in range(prep.n)),
        )


__all__ = [
    "DepartureTable",
    "EngineState",
    "simulate",
    "prepare",
    "table_prefix_equal",
    "MIN_WINDOW",
    "MAX_INDEX_SHIFT",
]
