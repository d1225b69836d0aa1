"""Max-plus algebra core and the algebraic oracle for the line dynamics.

In the max-plus semiring (R ∪ {-inf}, max, +) the departure recursion with
all platform demand switched off is linear: departures grow by the matrix
eigenvalue per period, and that eigenvalue equals the maximum cycle mean of
the precedence graph.  The module provides the semiring operations, two
independent maximum-cycle-mean algorithms (a dynamic program over walk
lengths and policy iteration), and the assembly of the precedence matrix
for a line, configuration pair.

Matrix convention: ``A.data[i, j]`` is the weight of the arc j -> i, so the
one-period dynamics read ``x(t+1) = A (x) x(t)`` with column vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import DemandProfile
from .errors import (
    Deadlock,
    DemandNotZero,
    DimensionMismatch,
    JunctionSimError,
    NotStronglyConnected,
)
from .topology import LineTopology, Part, TrainConfiguration, junction_offsets

EPS = float("-inf")


@dataclass(frozen=True, eq=False)
class MaxPlusMatrix:
    """Dense max-plus matrix; absent arcs are -inf."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 2:
            raise DimensionMismatch(f"matrix must be 2-D, got {self.data.ndim}-D")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @staticmethod
    def identity(n: int) -> "MaxPlusMatrix":
        d = np.full((n, n), EPS)
        np.fill_diagonal(d, 0.0)
        return MaxPlusMatrix(d)

    @staticmethod
    def from_entries(shape: tuple[int, int], entries: dict) -> "MaxPlusMatrix":
        d = np.full(shape, EPS)
        for (i, j), w in entries.items():
            d[i, j] = w
        return MaxPlusMatrix(d)

    def equals(self, other: "MaxPlusMatrix") -> bool:
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __matmul__(self, other: "MaxPlusMatrix") -> "MaxPlusMatrix":
        return mp_multiply(self, other)

    def to_csv(self, path) -> None:
        """Dense CSV; -inf entries are written as empty cells."""
        with open(path, "w") as fh:
            for i in range(self.shape[0]):
                row = [
                    "" if self.data[i, j] == EPS else f"{self.data[i, j]:.17g}"
                    for j in range(self.shape[1])
                ]
                fh.write(",".join(row) + "\n")

    @staticmethod
    def from_csv(path) -> "MaxPlusMatrix":
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line and not rows:
                    continue
                cells = line.split(",")
                rows.append([EPS if c == "" else float(c) for c in cells])
        if not rows or any(len(r) != len(rows[0]) for r in rows):
            raise DimensionMismatch(f"{path}: ragged or empty matrix CSV")
        return MaxPlusMatrix(np.array(rows))


def mp_multiply(a: MaxPlusMatrix, b: MaxPlusMatrix) -> MaxPlusMatrix:
    """Max-plus matrix product: C[i,j] = max_k (A[i,k] + B[k,j])."""
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    # Broadcast: [i, k, j] = A[i, k] + B[k, j]; -inf absorbs correctly.
    c = (a.data[:, :, None] + b.data[None, :, :]).max(axis=1)
    return MaxPlusMatrix(c)


def _longest_paths(data: np.ndarray) -> np.ndarray:
    """All-pairs longest path weights (Floyd-Warshall, max-plus powers)."""
    d = data.copy()
    n = d.shape[0]
    for k in range(n):
        via = d[:, k : k + 1] + d[k : k + 1, :]
        np.maximum(d, via, out=d)
    return d


def kleene_star(a: MaxPlusMatrix, tol: float = 1e-9) -> MaxPlusMatrix:
    """A* = I + A + A^2 + ...; diverges iff A has a positive-weight cycle."""
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"star needs a square matrix, got {a.shape}")
    d = _longest_paths(a.data)
    diag = np.diag(d)
    if np.any(diag > tol):
        nodes = [int(i) for i in np.flatnonzero(diag > tol)]
        raise Deadlock(
            f"Kleene star diverges: positive-weight cycle through nodes {nodes}",
            segments=tuple(nodes),
        )
    n = a.shape[0]
    star = d.copy()
    idx = np.arange(n)
    star[idx, idx] = np.maximum(star[idx, idx], 0.0)
    return MaxPlusMatrix(star)


def _finite_digraph_cycle(data: np.ndarray) -> tuple[int, ...]:
    """A cycle of the finite-entry digraph (Kahn peeling), or () if acyclic."""
    n = data.shape[0]
    finite = data > EPS  # finite[i, j] is the arc j -> i
    indeg = finite.sum(axis=1)
    alive = np.ones(n, dtype=bool)
    queue = [i for i in range(n) if indeg[i] == 0]
    while queue:
        i = queue.pop()
        alive[i] = False
        for k in np.flatnonzero(finite[:, i]):
            indeg[k] -= 1
            if indeg[k] == 0 and alive[k]:
                queue.append(int(k))
    if not alive.any():
        return ()
    # Walk backwards through still-alive predecessors until a repeat.
    start = int(np.flatnonzero(alive)[0])
    seen: dict[int, int] = {}
    chain = []
    i = start
    while i not in seen:
        seen[i] = len(chain)
        chain.append(i)
        preds = [int(j) for j in np.flatnonzero(finite[i, :]) if alive[j]]
        i = preds[0]
    cycle = chain[seen[i] :]
    cycle.reverse()
    return tuple(cycle)


def _strongly_connected(data: np.ndarray) -> bool:
    """Kosaraju on the finite-entry digraph (arc j->i for finite data[i,j])."""
    n = data.shape[0]
    if n == 0:
        return False
    finite = data > EPS
    out_arcs = [list(np.flatnonzero(finite[:, j])) for j in range(n)]  # j -> i
    in_arcs = [list(np.flatnonzero(finite[i, :])) for i in range(n)]  # i <- j

    def reaches_all(adj) -> bool:
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        return bool(seen.all())

    return reaches_all(out_arcs) and reaches_all(in_arcs)


@dataclass(frozen=True)
class CycleTimeResult:
    """Maximum cycle mean and one cycle achieving it (node ids, arc order)."""

    growth_rate: float
    critical_cycle: tuple[int, ...]


def cycle_time(matrix: MaxPlusMatrix) -> CycleTimeResult:
    """Maximum cycle mean of a strongly connected max-plus matrix.

    This is the asymptotic growth rate of x(t+1) = M (x) x(t): the dynamic
    program over exact walk lengths (longest walks of 0..n arcs from a fixed
    source) yields the cycle mean as max_v min_k (D[n][v]-D[k][v])/(n-k).
    """
    d = matrix.data
    if d.shape[0] != d.shape[1]:
        raise DimensionMismatch(f"cycle time needs a square matrix, got {d.shape}")
    n = d.shape[0]
    if n == 0:
        raise NotStronglyConnected("empty matrix has no cycles")
    if not _strongly_connected(d):
        raise NotStronglyConnected(
            "the precedence graph is not strongly connected; "
            "cycle means are not defined system-wide"
        )
    # Walk-length dynamic program from source 0.
    dp = np.full((n + 1, n), EPS)
    dp[0, 0] = 0.0
    for k in range(1, n + 1):
        dp[k] = (d + dp[k - 1][None, :]).max(axis=1)
    lam = EPS
    final = dp[n]
    for v in range(n):
        if final[v] == EPS:
            continue
        best = np.inf
        for k in range(n):
            if dp[k, v] == EPS:
                continue
            best = min(best, (final[v] - dp[k, v]) / (n - k))
        lam = max(lam, best)
    cycle = _critical_cycle(d, lam)
    return CycleTimeResult(growth_rate=float(lam), critical_cycle=cycle)


def _critical_cycle(d: np.ndarray, lam: float) -> tuple[int, ...]:
    """One cycle whose mean weight equals the maximum cycle mean."""
    n = d.shape[0]
    scale = max(1.0, abs(lam), float(np.max(np.where(d > EPS, np.abs(d), 0.0))))
    tol = 1e-9 * scale
    reduced = np.where(d > EPS, d - lam, EPS)
    # Longest-path potentials: n relaxation sweeps reach the fixpoint since
    # no reduced cycle has positive mean.
    pi = np.zeros(n)
    for _ in range(n):
        cand = (reduced + pi[None, :]).max(axis=1)
        np.maximum(pi, cand, out=pi)
    # Tight arcs: pi[i] ~ pi[j] + reduced[i, j]; every critical-cycle arc is
    # tight at the fixpoint, so the tight subgraph contains a cycle.
    slack = pi[:, None] - (reduced + pi[None, :])
    tight = (reduced > EPS) & (slack <= tol)
    succ_of = [list(np.flatnonzero(tight[:, j])) for j in range(n)]  # j -> i
    color = [0] * n  # 0 new, 1 on stack, 2 done
    for s in range(n):
        if color[s] != 0:
            continue
        stack: list[tuple[int, int]] = [(s, 0)]
        path = [s]
        color[s] = 1
        while stack:
            v, ptr = stack[-1]
            if ptr < len(succ_of[v]):
                stack[-1] = (v, ptr + 1)
                w = succ_of[v][ptr]
                if color[w] == 1:
                    cycle = path[path.index(w) :]
                    return tuple(cycle)
                if color[w] == 0:
                    color[w] = 1
                    stack.append((int(w), 0))
                    path.append(int(w))
            else:
                color[v] = 2
                stack.pop()
                path.pop()
    raise JunctionSimError("internal: no tight cycle found for the cycle mean")


def cycle_mean_of(matrix: MaxPlusMatrix, cycle: tuple[int, ...]) -> float:
    """Mean arc weight along ``cycle`` (node ids in arc order)."""
    if not cycle:
        raise DimensionMismatch("empty cycle has no mean")
    total = 0.0
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        w = matrix.data[b, a]
        if w == EPS:
            raise DimensionMismatch(f"cycle uses absent arc {a}->{b}")
        total += w
    return total / len(cycle)


def howard_cycle_time(matrix: MaxPlusMatrix, max_iters: int = 1000) -> float:
    """Maximum cycle mean by policy iteration (independent of cycle_time).

    Each node commits to one incoming arc (a policy); the policy's
    functional graph is evaluated exactly (cycle means and bias), then
    improved first on gain and then on bias until stable.
    """
    d = matrix.data
    if d.shape[0] != d.shape[1]:
        raise DimensionMismatch(f"cycle time needs a square matrix, got {d.shape}")
    n = d.shape[0]
    if n == 0:
        raise NotStronglyConnected("empty matrix has no cycles")
    if not _strongly_connected(d):
        raise NotStronglyConnected(
            "the precedence graph is not strongly connected; "
            "cycle means are not defined system-wide"
        )
    finite = d > EPS
    scale = max(1.0, float(np.max(np.abs(np.where(finite, d, 0.0)))))
    tol = 1e-12 * scale

    # Policy: sigma[i] = chosen source node j for arc j -> i.
    sigma = np.argmax(d, axis=1)

    gain = np.zeros(n)
    bias = np.zeros(n)
    for _ in range(max_iters):
        # ---- evaluate sigma ----
        state = np.zeros(n, dtype=np.int8)  # 0 new, 1 visiting, 2 resolved
        for s in range(n):
            if state[s] != 0:
                continue
            walk = []
            v = s
            while state[v] == 0:
                state[v] = 1
                walk.append(v)
                v = int(sigma[v])
            if state[v] == 1:
                # Found a new cycle: v is on it.
                c0 = walk.index(v)
                cyc = walk[c0:]
                eta = sum(d[i, sigma[i]] for i in cyc) / len(cyc)
                anchor = cyc[0]
                gain[anchor] = eta
                bias[anchor] = 0.0
                # Propagate bias backwards around the cycle from the anchor.
                for i in reversed(cyc[1:]):
                    nxt = int(sigma[i])
                    gain[i] = eta
                    bias[i] = d[i, nxt] - eta + bias[nxt]
                for i in cyc:
                    state[i] = 2
            # Tree nodes resolve against the already-resolved suffix.
            for i in reversed(walk):
                if state[i] == 2:
                    continue
                nxt = int(sigma[i])
                gain[i] = gain[nxt]
                bias[i] = d[i, nxt] - gain[nxt] + bias[nxt]
                state[i] = 2

        # ---- improve ----
        improved = False
        for i in range(n):
            js = np.flatnonzero(finite[i])
            # Stage 1: strictly better gain.
            gbest = gain[js].max()
            if gbest > gain[sigma[i]] + tol:
                cand = js[gain[js] >= gbest - tol]
                vals = d[i, cand] - gain[cand] + bias[cand]
                sigma[i] = int(cand[int(np.argmax(vals))])
                improved = True
                continue
            # Stage 2: equal gain, strictly better bias value.
            cand = js[gain[js] >= gain[sigma[i]] - tol]
            vals = d[i, cand] + bias[cand]
            cur = d[i, sigma[i]] + bias[sigma[i]]
            k = int(np.argmax(vals))
            if vals[k] > cur + tol:
                sigma[i] = int(cand[k])
                improved = True
        if not improved:
            return float(gain.max())
    raise JunctionSimError("policy iteration failed to converge")


# ---------------------------------------------------------------------------
# Assembly of the one-period precedence matrix for a line + configuration.
# ---------------------------------------------------------------------------


def first_order_matrix(
    n_nodes: int, arcs: list[tuple[int, int, float, int]]
) -> tuple[MaxPlusMatrix, tuple[int, ...]]:
    """Reduce a marked event graph to a one-period max-plus matrix.

    ``arcs`` holds ``(src, dst, weight, marking)`` with markings 0 or 1.
    Zero-marking arcs express same-period precedence; they must be acyclic
    (a zero-marking cycle means no event of the period can fire first), and
    are eliminated through the Kleene star: M = star(A0) (x) A1.

    The elimination leaves nodes that never source a marked arc with empty
    columns; they are transient appendages with no effect on cycle means,
    so the matrix is trimmed to the recurrent core.  Returns the trimmed
    matrix and the original ids of the kept nodes (row/column order).
    """
    a0 = np.full((n_nodes, n_nodes), EPS)
    a1 = np.full((n_nodes, n_nodes), EPS)
    for src, dst, w, mu in arcs:
        if mu == 0:
            a0[dst, src] = max(a0[dst, src], w)
        elif mu == 1:
            a1[dst, src] = max(a1[dst, src], w)
        else:
            raise DimensionMismatch(f"arc marking must be 0 or 1, got {mu}")
    cyc = _finite_digraph_cycle(a0)
    if cyc:
        raise Deadlock(
            "structural deadlock: same-period precedence cycle through "
            f"nodes {list(cyc)}",
            segments=cyc,
        )
    star = kleene_star(MaxPlusMatrix(a0))
    full = mp_multiply(star, MaxPlusMatrix(a1)).data
    # Peel nodes with no finite in-arc or no finite out-arc: they cannot lie
    # on any cycle.
    keep = np.ones(n_nodes, dtype=bool)
    changed = True
    while changed:
        changed = False
        sub = np.where(keep[:, None] & keep[None, :], full, EPS)
        has_in = (sub > EPS).any(axis=1)
        has_out = (sub > EPS).any(axis=0)
        live = has_in & has_out & keep
        if not np.array_equal(live, keep):
            keep = live
            changed = True
    kept = tuple(int(i) for i in np.flatnonzero(keep))
    if not kept:
        raise NotStronglyConnected(
            "the reduced system has no recurrent nodes (no cycle uses a "
            "marked arc)"
        )
    idx = np.flatnonzero(keep)
    return MaxPlusMatrix(full[np.ix_(idx, idx)]), kept


def node_labels(topology: LineTopology) -> tuple[tuple[int, int | None], ...]:
    """Node order used by assemble_matrix: (segment, slot) pairs.

    Central segments get two nodes (the even and odd halves of their count
    stream, interleaved by the junction); branch segments get one.
    """
    labels: list[tuple[int, int | None]] = []
    central = set(topology.part_ids(Part.CENTRAL))
    for seg in topology.segments:
        if seg.id in central:
            labels.append((seg.id, 0))
            labels.append((seg.id, 1))
        else:
            labels.append((seg.id, None))
    return tuple(labels)


def assemble_matrix(
    topology: LineTopology,
    config: TrainConfiguration,
    demand: DemandProfile | None = None,
) -> MaxPlusMatrix:
    """One-period precedence matrix of the demand-free dynamics.

    Valid only when every effective platform arrival rate is zero (dwell
    equals its minimum and the recursion is max-plus linear); otherwise
    raises DemandNotZero.  Raises Deadlock if the configuration admits a
    same-period precedence cycle (no event can fire).
    """
    matrix, _ = _assemble(topology, config, demand)
    return matrix


def _assemble(
    topology: LineTopology,
    config: TrainConfiguration,
    demand: DemandProfile | None = None,
) -> tuple[MaxPlusMatrix, tuple[tuple[int, int | None], ...]]:
    """assemble_matrix plus the (segment, slot) labels of the kept nodes."""
    for seg in topology.segments:
        if seg.platform is None:
            continue
        lam = seg.platform.arrival_rate
        if demand is not None:
            lam *= demand.factor(seg.part)
        if lam != 0.0:
            raise DemandNotZero(
                f"segment {seg.id}: effective arrival rate {lam} != 0; "
                "the demand-free matrix form does not apply"
            )

    labels = node_labels(topology)
    node_of: dict[tuple[int, int | None], int] = {
        lab: i for i, lab in enumerate(labels)
    }
    central = set(topology.part_ids(Part.CENTRAL))
    b = config.occupancy
    sigma1, tau1 = junction_offsets(topology, config)
    sigma = {0: sigma1, 1: 1 - sigma1}
    tau = {0: tau1, 1: 1 - tau1}
    conv, div = topology.convergence_id, topology.divergence_id
    tails, heads = topology.branch_tails, topology.branch_heads

    def w_move(j: int) -> float:
        seg = topology.segments[j]
        dwell = seg.platform.min_dwell if seg.platform is not None else 0.0
        return seg.nominal_run_time + dwell

    def central_node(x: int, slot: int, mu_extra: int = 0) -> tuple[int, int]:
        """Normalize a possibly out-of-range slot into (node, marking)."""
        if slot < 0:
            return node_of[(x, slot + 2)], mu_extra + 1
        if slot > 1:
            return node_of[(x, slot - 2)], mu_extra + 1
        return node_of[(x, slot)], mu_extra

    arcs: list[tuple[int, int, float, int]] = []
    for seg in topology.segments:
        j = seg.id
        if j in central:
            for rho in (0, 1):
                dst = node_of[(j, rho)]
                # Movement into j.
                if j == conv:
                    i_par = rho - b[j]
                    u = 0 if (i_par % 2) == sigma1 else 1
                    mu = 1 if i_par < 0 else 0
                    arcs.append((node_of[(tails[u], None)], dst, w_move(j), mu))
                else:
                    p = topology.predecessor[j]
                    assert p is not None and p in central
                    src, mu = central_node(p, rho - b[j])
                    arcs.append((src, dst, w_move(j), mu))
                # Safety: successor clears j's next block.
                if j == div:
                    u = 0 if (rho % 2) == tau1 else 1
                    q = heads[u]
                    mu = 1 - b[q]
                    arcs.append((node_of[(q, None)], dst, topology.segments[q].safe_separation_time, mu))
                else:
                    q = topology.successor[j]
                    assert q is not None and q in central
                    src, mu = central_node(q, rho + b[q] - 1)
                    arcs.append((src, dst, topology.segments[q].safe_separation_time, mu))
        else:
            dst = node_of[(j, None)]
            u = 0 if seg.part is Part.BRANCH1 else 1
            # Movement into j.
            if j == heads[u]:
                src, mu = central_node(div, tau[u], mu_extra=b[j])
                arcs.append((src, dst, w_move(j), mu))
            else:
                p = topology.predecessor[j]
                assert p is not None and p not in central
                arcs.append((node_of[(p, None)], dst, w_move(j), b[j]))
            # Safety.
            if j == tails[u]:
                src, mu = central_node(conv, sigma[u] + b[conv] - 1)
                arcs.append((src, dst, topology.segments[conv].safe_separation_time, mu))
            else:
                q = topology.successor[j]
                assert q is not None and q not in central
                arcs.append(
                    (node_of[(q, None)], dst, topology.segments[q].safe_separation_time, 1 - b[q])
                )

    matrix, kept = first_order_matrix(len(labels), arcs)
    return matrix, tuple(labels[i] for i in kept)


def cycle_headway(
    topology: LineTopology,
    config: TrainConfiguration,
    demand: DemandProfile | None = None,
) -> CycleTimeResult:
    """Asymptotic central headway (seconds per count) from the matrix oracle.

    The matrix advances one junction period per application; central
    segments make two counts per period, so the per-count growth on the
    central part is half the matrix eigenvalue.  The critical cycle is
    reported as segment ids.
    """
    matrix, labels = _assemble(topology, config, demand)
    result = cycle_time(matrix)
    segs = tuple(labels[v][0] for v in result.critical_cycle)
    return CycleTimeResult(growth_rate=result.growth_rate / 2.0, critical_cycle=segs)


__all__ = [
    "EPS",
    "MaxPlusMatrix",
    "mp_multiply",
    "kleene_star",
    "cycle_time",
    "cycle_mean_of",
    "howard_cycle_time",
    "CycleTimeResult",
    "first_order_matrix",
    "assemble_matrix",
    "node_labels",
    "cycle_headway",
]
