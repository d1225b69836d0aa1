"""Random problem generators shared by the oracle-agreement tests."""

import numpy as np

from junctionsim import build_line, feasible_grid, seed_trains
from junctionsim.maxplus import EPS, MaxPlusMatrix


def random_line(rng: np.random.Generator, max_segments: int = 16):
    """A random valid line description with zero platform demand.

    Segment counts per part/direction are drawn so the total stays within
    ``max_segments``; every part keeps at least one platform (a build_line
    requirement) and run/separation times are drawn from wide ranges.
    """
    while True:
        nc = int(rng.integers(1, 5))   # central segments per direction
        nb1 = int(rng.integers(1, 3))
        nb2 = int(rng.integers(1, 3))
        if 2 * (nc + nb1 + nb2) <= max_segments:
            break

    def segment(with_platform: bool) -> dict:
        run = float(rng.uniform(30.0, 90.0))
        margin = float(rng.uniform(0.0, 20.0))
        d = {
            "run_time": run,
            "min_run_time": max(1.0, run - margin),
            "safe_separation": float(rng.uniform(5.0, 45.0)),
        }
        if with_platform:
            wmin = float(rng.uniform(0.0, 20.0))
            d["platform"] = {
                "lambda": 0.0,
                "alpha": 1.0,
                "min_dwell": wmin,
                "max_dwell": wmin + float(rng.uniform(0.0, 30.0)),
            }
        return d

    def direction(n: int) -> list[dict]:
        has = [bool(rng.integers(0, 2)) for _ in range(n)]
        if not any(has):
            has[int(rng.integers(0, n))] = True
        return [segment(h) for h in has]

    return build_line(
        {
            "central": {"outbound": direction(nc), "inbound": direction(nc)},
            "branch1": {"outbound": direction(nb1), "inbound": direction(nb1)},
            "branch2": {"outbound": direction(nb2), "inbound": direction(nb2)},
        }
    )


def random_seed_point(topology, rng: np.random.Generator, m_min: int = 1):
    """A random feasible (m, dm) configuration for ``topology``."""
    grid = [(m, dm) for (m, dm) in feasible_grid(topology) if m >= m_min]
    m, dm = grid[int(rng.integers(0, len(grid)))]
    return seed_trains(topology, m, dm)


def random_strongly_connected(rng: np.random.Generator, n_max: int = 50) -> MaxPlusMatrix:
    """Random strongly connected max-plus matrix (Hamiltonian cycle + extras)."""
    n = int(rng.integers(2, n_max + 1))
    data = np.full((n, n), EPS)
    order = rng.permutation(n)
    for a, b in zip(order, np.roll(order, -1)):
        data[b, a] = rng.uniform(-10.0, 10.0)  # arc a -> b
    extra = int(rng.integers(0, 3 * n))
    for _ in range(extra):
        i, j = rng.integers(0, n, size=2)
        data[i, j] = max(data[i, j], rng.uniform(-10.0, 10.0))
    return MaxPlusMatrix(data)
