"""Entity-level oracle: trains as individually scheduled objects.

This is a deliberately independent implementation of the line dynamics.
Instead of per-segment count recursions it keeps per-train state (current
segment, arrival time, carried dwell extension) and per-segment state
(occupant, last departure, accumulation reference) and executes train moves
in global time order off a priority queue.  Junction alternation is enforced
by two explicit gate counters rather than by index arithmetic.

Agreement between this simulation and the recursion engine is therefore a
meaningful cross-check: they share no evaluation machinery, only the
physical rules.
"""

from __future__ import annotations

import heapq

import numpy as np

from .control import ControlParams, DemandProfile
from .errors import Deadlock, NegativeInterval
from .engine import DepartureTable, _Prep, prepare
from .topology import LineTopology, TrainConfiguration


def entity_simulate(
    topology: LineTopology,
    config: TrainConfiguration,
    demand: DemandProfile | None = None,
    controls: ControlParams | None = None,
    counts: int = 500,
    initial_offsets: dict[int, float] | None = None,
) -> DepartureTable:
    """Simulate until every segment has recorded ``counts`` departures."""
    prep = prepare(topology, config, demand, controls, counts, initial_offsets)
    if config.m == 0:
        return _empty(prep)
    return _EntitySim(prep).run()


def _empty(prep: _Prep) -> DepartureTable:
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


class _EntitySim:
    def __init__(self, prep: _Prep):
        self.p = prep
        n = prep.n
        self.occupant = [-1] * n          # train id or -1
        self.last_dep = [None] * n        # last departure time, None if never
        self.accum_ref = [0.0] * n        # dwell accumulation reference
        self.count = [0] * n
        # Gate counters: branch index (0/1) whose turn it is.
        self.merge_next = prep.sigma1
        self.dispatch_next = prep.tau1
        # Per-train state, filled on entry to a segment.
        self.seg: list[int] = []
        self.ready_dep: list[float] = []
        self.arrival: list[float] = []
        self.carried_ext: list[float] = []
        # Recorded streams per segment.
        self.rec_arr: list[list[float]] = [[] for _ in range(n)]
        self.rec_dep: list[list[float]] = [[] for _ in range(n)]
        self.rec_ext: list[list[float]] = [[] for _ in range(n)]
        self.rec_bind: list[list[int]] = [[] for _ in range(n)]
        self.heap: list[tuple[float, int, int]] = []  # (time, segment, train)
        self.has_candidate: list[bool] = []

        parked = [j for j in range(n) if prep.occupied[j]]
        for t, j in enumerate(parked):
            self.seg.append(j)
            self.occupant[j] = t
            self.has_candidate.append(False)
            self._enter(t, j, arrival=float(prep.ready[j]), ext_in=0.0)
        for t in range(len(parked)):
            self._refresh(t)

    # ---- physics ----------------------------------------------------------

    def _enter(self, t: int, j: int, arrival: float, ext_in: float) -> None:
        """Fix arrival, dwell and carried extension on entering segment j."""
        p = self.p
        if len(self.arrival) <= t:
            self.arrival.append(0.0)
            self.ready_dep.append(0.0)
            self.carried_ext.append(0.0)
        self.arrival[t] = arrival
        if p.is_plat[j]:
            interval = arrival - self.accum_ref[j]
            if interval < 0.0:
                raise NegativeInterval(
                    f"segment {j}: arrival {arrival} precedes the previous "
                    f"departure {self.accum_ref[j]}"
                )
            w = p.ratio[j] * interval
            if w < p.wmin[j]:
                w = p.wmin[j]
            elif w > p.wmax[j]:
                w = p.wmax[j]
            ext_out = w - p.wnom[j]
            if ext_out < 0.0:
                ext_out = 0.0
            self.ready_dep[t] = arrival + w
            self.carried_ext[t] = ext_out
        else:
            self.ready_dep[t] = arrival
            self.carried_ext[t] = ext_in  # unrecovered residual keeps going
        self.seg[t] = j

    def _run_into(self, j: int, ext_in: float) -> tuple[float, float]:
        """Controlled run time into segment j and the residual extension."""
        p = self.p
        if ext_in <= 0.0:
            return p.run_nom[j], 0.0
        run_eff = p.run_nom[j] - ext_in
        if run_eff < p.run_min[j]:
            run_eff = p.run_min[j]
        return run_eff, ext_in - (p.run_nom[j] - run_eff)

    # ---- candidate management ---------------------------------------------

    def _target(self, j: int) -> int | None:
        """Next segment for a train sitting on j, or None if gated away."""
        p = self.p
        if j == p.div:
            return p.heads[self.dispatch_next]
        if j == p.tails[0]:
            return p.conv if self.merge_next == 0 else None
        if j == p.tails[1]:
            return p.conv if self.merge_next == 1 else None
        s = p.succ[j]
        return int(s)

    def _refresh(self, t: int) -> None:
        """(Re)issue the move candidate for train t if it is enabled."""
        if self.has_candidate[t]:
            return
        j = self.seg[t]
        q = self._target(j)
        if q is None or self.occupant[q] != -1:
            return
        dep_time = self.ready_dep[t]
        if self.last_dep[q] is not None:
            safe = self.last_dep[q] + self.p.sep[q]
            if safe > dep_time:
                dep_time = safe
        heapq.heappush(self.heap, (dep_time, j, t))
        self.has_candidate[t] = True

    def _feeder_train(self, j: int) -> int | None:
        """The train currently waiting to enter segment j, if any."""
        p = self.p
        if j == p.conv:
            src = p.tails[self.merge_next]
        elif j == p.heads[0] or j == p.heads[1]:
            u = 0 if j == p.heads[0] else 1
            if self.dispatch_next != u:
                return None
            src = p.div
        else:
            src = int(p.pred[j])
        t = self.occupant[src]
        return t if t >= 0 else None

    # ---- main loop ---------------------------------------------------------

    def run(self) -> DepartureTable:
        p = self.p
        need = p.k_target
        while min(self.count) < need:
            if not self.heap:
                cycle = self._blocked_cycle()
                raise Deadlock(
                    "no train can move: circular blocking among segments "
                    f"{list(cycle)}",
                    segments=cycle,
                )
            dep_time, j, t = heapq.heappop(self.heap)
            self.has_candidate[t] = False
            q = self._target(j)
            assert q is not None and self.occupant[q] == -1

            # Binding census: did the safety term achieve the max?
            forward = self.ready_dep[t]
            if dep_time <= forward:
                code = 2 if (j == p.conv or j == p.heads[0] or j == p.heads[1]) else 0
            else:
                code = 3 if (j == p.div or j == p.tails[0] or j == p.tails[1]) else 1

            # Record the departure from j.
            self.rec_arr[j].append(self.arrival[t])
            self.rec_dep[j].append(dep_time)
            self.rec_ext[j].append(self.carried_ext[t])
            self.rec_bind[j].append(code)
            self.count[j] += 1
            self.last_dep[j] = dep_time
            self.accum_ref[j] = dep_time
            self.occupant[j] = -1

            # Gates flip on the move that consumed the turn.
            if j == p.tails[0] or j == p.tails[1]:
                self.merge_next = 1 - self.merge_next
            elif j == p.div:
                self.dispatch_next = 1 - self.dispatch_next

            # Move the train into q.
            ext_in = self.carried_ext[t]
            run_eff, resid = self._run_into(q, ext_in)
            self.occupant[q] = t
            self._enter(t, q, arrival=dep_time + run_eff, ext_in=resid)

            # Refresh the candidates this move may have enabled: the moved
            # train itself and the train waiting to enter the vacated
            # segment.  Gate flips need no extra refresh: the segment behind
            # a flipped gate is the one just vacated (or just occupied), so
            # the newly allowed train is picked up when that segment clears.
            self._refresh(t)
            ft = self._feeder_train(j)
            if ft is not None:
                self._refresh(ft)
        return self._table()

    def _blocked_cycle(self) -> tuple[int, ...]:
        p = self.p
        blocker = {}
        for j in range(p.n):
            if self.occupant[j] >= 0:
                q = self._target(j)
                if q is None:
                    # Gated: waiting on the other tail's merge.
                    blocker[j] = p.tails[self.merge_next]
                elif self.occupant[q] >= 0:
                    blocker[j] = q
            else:
                if j == p.conv:
                    blocker[j] = p.tails[self.merge_next]
                elif j == p.heads[0] or j == p.heads[1]:
                    blocker[j] = p.div
                else:
                    blocker[j] = int(p.pred[j])
        start = next((j for j in blocker if self.occupant[j] >= 0), None)
        if start is None:
            return ()
        seen: dict[int, int] = {}
        chain: list[int] = []
        j = start
        while j in blocker and j not in seen:
            seen[j] = len(chain)
            chain.append(j)
            j = blocker[j]
        if j in seen:
            return tuple(chain[seen[j] :])
        return tuple(chain)

    def _table(self) -> DepartureTable:
        p = self.p
        return DepartureTable(
            k_target=p.k_target,
            parts=p.parts,
            counts=tuple(self.count),
            arrivals=tuple(np.array(r) for r in self.rec_arr),
            departures=tuple(np.array(r) for r in self.rec_dep),
            extensions=tuple(np.array(r) for r in self.rec_ext),
            bindings=tuple(np.array(r, dtype=np.int8) for r in self.rec_bind),
        )


__all__ = ["entity_simulate"]
