"""Benchmark: pure-Python vs compiled recursion kernel.

Runs the same simulations on both backends, checks the outputs agree
exactly, and reports wall-clock times.  Usage::

    python benchmarks/bench_kernels.py [--counts K] [--repeat R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from junctionsim.engine import simulate
from junctionsim.kernels import compiled_available
from junctionsim.topology import build_desk_line, desk_demand_line, seed_trains


def _time_one(topology, config, counts: int, backend: str, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        simulate(topology, config, counts=counts, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--counts", type=int, default=2000, help="departure counts per segment")
    parser.add_argument("--repeat", type=int, default=3, help="repetitions (best time wins)")
    args = parser.parse_args()

    cases = {
        "zero-demand (m=6, dm=0)": (build_desk_line(), 6, 0),
        "light-demand (m=6, dm=0)": (desk_demand_line(), 6, 0),
        "congested (m=10, dm=0)": (build_desk_line(), 10, 0),
    }

    if not compiled_available():
        print("compiled kernel not built; only the pure backend is timed")

    print(f"{'case':<28} {'pure':>10} {'compiled':>10} {'speedup':>8}  agree")
    for name, (topo, m, dm) in cases.items():
        config = seed_trains(topo, m, dm)
        t_pure = _time_one(topo, config, args.counts, "pure", args.repeat)
        if not compiled_available():
            print(f"{name:<28} {t_pure*1e3:>8.1f}ms {'-':>10} {'-':>8}")
            continue
        t_comp = _time_one(topo, config, args.counts, "compiled", args.repeat)
        a = simulate(topo, config, counts=args.counts, backend="pure")
        b = simulate(topo, config, counts=args.counts, backend="compiled")
        agree = all(
            np.array_equal(np.asarray(x), np.asarray(y))
            for x, y in zip(a.departures, b.departures)
        )
        print(
            f"{name:<28} {t_pure*1e3:>8.1f}ms {t_comp*1e3:>8.1f}ms "
            f"{t_pure/t_comp:>7.1f}x  {agree}"
        )


if __name__ == "__main__":
    main()
