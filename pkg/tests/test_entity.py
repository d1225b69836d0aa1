"""Entity-level oracle vs the recursion engine: exact agreement."""

import numpy as np
import pytest

from junctionsim import entity_simulate, seed_trains, simulate
from junctionsim.errors import Deadlock

from helpers import random_line, random_seed_point


def assert_tables_equal(a, b, k_target):
    """Exact agreement on the common prefix, both reaching the count target.

    The two engines may overshoot the per-segment target by different amounts
    (the recursion advances greedily, the entity loop stops at the target), so
    equality is judged on the overlapping prefix of each segment's columns.
    """
    assert a.n_segments == b.n_segments
    for j in range(a.n_segments):
        k = min(a.counts[j], b.counts[j])
        assert k >= k_target, f"segment {j}: only {k} events"
        assert np.array_equal(a.departures[j][:k], b.departures[j][:k]), f"segment {j}"
        assert np.array_equal(a.arrivals[j][:k], b.arrivals[j][:k]), f"segment {j}"
        assert np.array_equal(a.bindings[j][:k], b.bindings[j][:k]), f"segment {j}"


def test_desk_exact_agreement(desk):
    for m, dm in ((1, 0), (3, 1), (4, 0), (6, -1), (8, 0), (10, 1)):
        cfg = seed_trains(desk, m, dm)
        assert_tables_equal(
            simulate(desk, cfg, counts=150),
            entity_simulate(desk, cfg, counts=150),
            150,
        )


def test_desk_agreement_with_demand():
    from junctionsim import desk_demand_line

    topo = desk_demand_line()
    for m, dm in ((2, 0), (6, 0), (10, -1)):
        cfg = seed_trains(topo, m, dm)
        assert_tables_equal(
            simulate(topo, cfg, counts=150),
            entity_simulate(topo, cfg, counts=150),
            150,
        )


def test_random_instances_exact_agreement():
    rng = np.random.default_rng(1234)
    for _ in range(6):
        topo = random_line(rng)
        cfg = random_seed_point(topo, rng)
        try:
            table = simulate(topo, cfg, counts=120)
        except Deadlock:
            with pytest.raises(Deadlock):
                entity_simulate(topo, cfg, counts=120)
            continue
        assert_tables_equal(table, entity_simulate(topo, cfg, counts=120), 120)


def test_deadlock_agreement(desk):
    for m, dm in ((12, 0), (2, 2), (1, -1)):
        cfg = seed_trains(desk, m, dm)
        with pytest.raises(Deadlock):
            simulate(desk, cfg, counts=10)
        with pytest.raises(Deadlock):
            entity_simulate(desk, cfg, counts=10)


def test_empty_system_agreement(desk):
    cfg = seed_trains(desk, 0, 0)
    assert_tables_equal(
        simulate(desk, cfg, counts=10), entity_simulate(desk, cfg, counts=10), 0
    )
