"""Command-line interface: scenario configs in, CSV/JSON artifacts out.

A scenario is a single JSON file (all times in seconds)::

    {
      "line": "desk",                      // or {"desk": {...}} or a full description
      "demand": {"central": 1.0, "branch1": 1.0, "branch2": 1.0, "everywhere": 1.0},
      "controls": {"reference_headway": 300.0, "initial_offset_step": 0.0},
      "run": {"m": 6, "dm": 0, "counts": 500, "transient_fraction": 0.3},
      "sweep": {"m_range": [0, 12], "dm_range": [-2, 2], "theta": 0.9,
                "plateau_rtol": 0.001, "parallel": 1}
    }

``line`` is either the name ``"desk"`` (the stock 12-segment instance),
``{"desk": {...}}`` with overrides for :func:`junctionsim.topology.desk_line`,
or a full line description as accepted by
:func:`junctionsim.topology.build_line`.  Every subcommand reads ``--config``;
``--counts``, ``--transient`` and ``--parallel`` override the file.  Outputs
are byte-stable: rerunning a subcommand on the same config reproduces each
artifact exactly.  Frequencies in outputs are trains/hour.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (
    boundaries_to_csv,
    compare_scenarios,
    diagram_to_csv,
    extract_boundaries,
    growth_rate,
    sweep,
)
from .control import DemandProfile, control_params
from .engine import simulate
from .entity import entity_simulate
from .errors import ConfigParse, ConfigError, JunctionSimError
from .maxplus import cycle_headway
from .topology import (
    LineTopology,
    Part,
    build_desk_line,
    build_line,
    capacity,
    seed_trains,
)

_ORACLE_DEFAULT_TOL = 1e-6


@dataclass
class ScenarioConfig:
    """Parsed scenario file: topology plus run/sweep options."""

    topology: LineTopology
    demand: DemandProfile
    reference_headway: float = 300.0
    initial_offset_step: float = 0.0
    m: int = 1
    dm: int = 0
    counts: int = 500
    transient_fraction: float = 0.3
    initial_offsets: dict[int, float] | None = None
    m_range: tuple[int, int] | None = None
    dm_range: tuple[int, int] | None = None
    theta: float = 0.9
    plateau_rtol: float = 1e-3
    parallel: int = 1

    def controls(self):
        return control_params(
            self.topology,
            self.demand,
            reference_headway=self.reference_headway,
            initial_offset_step=self.initial_offset_step,
        )


def _require(mapping: dict, key: str, types, where: str):
    if key not in mapping:
        raise ConfigParse(f"{where}: missing required field '{key}'")
    value = mapping[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise ConfigParse(
            f"{where}.{key}: expected {getattr(types, '__name__', types)}, "
            f"got {type(value).__name__}"
        )
    return value


def _get_number(mapping: dict, key: str, default: float, where: str) -> float:
    value = mapping.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigParse(f"{where}.{key}: expected a number, got {type(value).__name__}")
    return float(value)


def _get_int(mapping: dict, key: str, default: int, where: str) -> int:
    value = mapping.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigParse(f"{where}.{key}: expected an integer, got {type(value).__name__}")
    return value


def _get_range(mapping: dict, key: str, where: str) -> tuple[int, int] | None:
    value = mapping.get(key)
    if value is None:
        return None
    if (
        not isinstance(value, list)
        or len(value) != 2
        or any(isinstance(v, bool) or not isinstance(v, int) for v in value)
    ):
        raise ConfigParse(f"{where}.{key}: expected [min, max] integers")
    lo, hi = value
    if hi < lo:
        raise ConfigParse(f"{where}.{key}: empty range [{lo}, {hi}]")
    return lo, hi


def _build_topology(line, where: str) -> LineTopology:
    if line == "desk":
        return build_desk_line()
    if isinstance(line, dict) and set(line) == {"desk"}:
        kwargs = line["desk"]
        if not isinstance(kwargs, dict):
            raise ConfigParse(f"{where}.desk: expected an object of desk-line overrides")
        try:
            return build_desk_line(**kwargs)
        except TypeError as exc:
            raise ConfigParse(f"{where}.desk: {exc}") from exc
    if isinstance(line, dict):
        return build_line(line)
    raise ConfigParse(
        f"{where}: expected \"desk\", {{\"desk\": {{...}}}} or a full line description"
    )


def load_scenario(path) -> ScenarioConfig:
    """Parse and validate a scenario JSON file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigParse(f"{path}: top level must be an object")

    line = _require(raw, "line", (str, dict), str(path))
    topology = _build_topology(line, f"{path}:line")

    demand_raw = raw.get("demand", {})
    if not isinstance(demand_raw, dict):
        raise ConfigParse(f"{path}:demand: expected an object")
    demand = DemandProfile(
        central=_get_number(demand_raw, "central", 1.0, f"{path}:demand"),
        branch1=_get_number(demand_raw, "branch1", 1.0, f"{path}:demand"),
        branch2=_get_number(demand_raw, "branch2", 1.0, f"{path}:demand"),
        everywhere=_get_number(demand_raw, "everywhere", 1.0, f"{path}:demand"),
    )

    controls_raw = raw.get("controls", {})
    if not isinstance(controls_raw, dict):
        raise ConfigParse(f"{path}:controls: expected an object")
    run_raw = raw.get("run", {})
    if not isinstance(run_raw, dict):
        raise ConfigParse(f"{path}:run: expected an object")
    sweep_raw = raw.get("sweep", {})
    if not isinstance(sweep_raw, dict):
        raise ConfigParse(f"{path}:sweep: expected an object")

    offsets_raw = run_raw.get("initial_offsets")
    offsets = None
    if offsets_raw is not None:
        if not isinstance(offsets_raw, dict):
            raise ConfigParse(f"{path}:run.initial_offsets: expected an object")
        offsets = {}
        for key, value in offsets_raw.items():
            try:
                seg = int(key)
            except ValueError:
                raise ConfigParse(
                    f"{path}:run.initial_offsets: segment id {key!r} is not an integer"
                ) from None
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigParse(
                    f"{path}:run.initial_offsets.{key}: expected a number"
                )
            offsets[seg] = float(value)

    transient = _get_number(run_raw, "transient_fraction", 0.3, f"{path}:run")
    if not 0.0 <= transient < 1.0:
        raise ConfigParse(
            f"{path}:run.transient_fraction: must be in [0, 1), got {transient}"
        )

    return ScenarioConfig(
        topology=topology,
        demand=demand,
        reference_headway=_get_number(
            controls_raw, "reference_headway", 300.0, f"{path}:controls"
        ),
        initial_offset_step=_get_number(
            controls_raw, "initial_offset_step", 0.0, f"{path}:controls"
        ),
        m=_get_int(run_raw, "m", 1, f"{path}:run"),
        dm=_get_int(run_raw, "dm", 0, f"{path}:run"),
        counts=_get_int(run_raw, "counts", 500, f"{path}:run"),
        transient_fraction=transient,
        initial_offsets=offsets,
        m_range=_get_range(sweep_raw, "m_range", f"{path}:sweep"),
        dm_range=_get_range(sweep_raw, "dm_range", f"{path}:sweep"),
        theta=_get_number(sweep_raw, "theta", 0.9, f"{path}:sweep"),
        plateau_rtol=_get_number(sweep_raw, "plateau_rtol", 1e-3, f"{path}:sweep"),
        parallel=_get_int(sweep_raw, "parallel", 1, f"{path}:sweep"),
    )


def _seed(cfg: ScenarioConfig, config_path: str):
    try:
        return seed_trains(cfg.topology, cfg.m, cfg.dm)
    except ConfigError as exc:
        raise ConfigParse(f"{config_path}:run.m/run.dm: {exc}") from exc


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _finite_or_none(x: float):
    return None if math.isinf(x) or math.isnan(x) else x


def _run_sweep(cfg: ScenarioConfig, counts: int, transient: float, parallel: int):
    m_range = range(cfg.m_range[0], cfg.m_range[1] + 1) if cfg.m_range else None
    dm_range = range(cfg.dm_range[0], cfg.dm_range[1] + 1) if cfg.dm_range else None
    return sweep(
        cfg.topology,
        demand=cfg.demand,
        controls=cfg.controls(),
        m_range=m_range,
        dm_range=dm_range,
        counts=counts,
        transient_fraction=transient,
        theta=cfg.theta,
        plateau_rtol=cfg.plateau_rtol,
        parallel=parallel,
    )


def _cmd_validate(args) -> int:
    cfg = load_scenario(args.config)
    topo = cfg.topology
    cfg.controls()  # demand/controls must be realizable too
    n_platforms = sum(1 for s in topo.segments if s.platform is not None)
    print(f"segments: {len(topo.segments)}")
    print(f"platforms: {n_platforms}")
    print(f"capacity: {capacity(topo)}")
    for part in (Part.CENTRAL, Part.BRANCH1, Part.BRANCH2):
        ids = topo.part_ids(part)
        print(f"part {part.value}: {len(ids)} segments {list(ids)}")
    print("config ok")
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_scenario(args.config)
    counts = args.counts or cfg.counts
    transient = args.transient if args.transient is not None else cfg.transient_fraction
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _seed(cfg, args.config)
    table = simulate(
        cfg.topology,
        config,
        demand=cfg.demand,
        controls=cfg.controls(),
        counts=counts,
        initial_offsets=cfg.initial_offsets,
    )
    estimate = growth_rate(table, transient_fraction=transient)
    table.to_csv(out / "departures.csv")
    _write_json(
        out / "summary.json",
        {
            "m": cfg.m,
            "dm": cfg.dm,
            "counts": counts,
            "f0_tph": 3600.0 * estimate.f0,
            "h0_s": _finite_or_none(estimate.h0),
            "h1_s": _finite_or_none(estimate.h1),
            "h2_s": _finite_or_none(estimate.h2),
            "converged": estimate.converged,
            "method": estimate.method,
        },
    )
    print(f"wrote {out / 'departures.csv'} and {out / 'summary.json'}")
    return 0


def _write_failures(path: Path, diagram) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "dm", "error"])
        for (m, dm) in sorted(diagram.failures):
            writer.writerow([m, dm, diagram.failures[(m, dm)]])


def _cmd_sweep(args) -> int:
    cfg = load_scenario(args.config)
    counts = args.counts or cfg.counts
    transient = args.transient if args.transient is not None else cfg.transient_fraction
    parallel = args.parallel or cfg.parallel
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    diagram = _run_sweep(cfg, counts, transient, parallel)
    diagram_to_csv(diagram, out / "phase_diagram.csv")
    _write_failures(out / "failures.csv", diagram)
    print(
        f"swept {len(diagram.grid)} points "
        f"({len(diagram.failures)} failures, {len(diagram.infeasible)} infeasible); "
        f"wrote {out / 'phase_diagram.csv'}"
    )
    return 0


def _cmd_boundaries(args) -> int:
    cfg = load_scenario(args.config)
    counts = args.counts or cfg.counts
    transient = args.transient if args.transient is not None else cfg.transient_fraction
    parallel = args.parallel or cfg.parallel
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    diagram = _run_sweep(cfg, counts, transient, parallel)
    ag, jd = extract_boundaries(diagram)
    boundaries_to_csv((ag, jd), out / "boundaries.csv")
    _write_json(
        out / "boundary_fits.json",
        {
            name: {
                "slope": b.slope,
                "intercept": b.intercept,
                "r_squared": b.r_squared,
                "points": len(b.points),
            }
            for name, b in (("AG", ag), ("JD", jd))
        },
    )
    print(f"wrote {out / 'boundaries.csv'} and {out / 'boundary_fits.json'}")
    return 0


def _cmd_compare(args) -> int:
    base_cfg = load_scenario(args.config)
    var_cfg = load_scenario(args.variant)
    counts = args.counts or base_cfg.counts
    transient = (
        args.transient if args.transient is not None else base_cfg.transient_fraction
    )
    parallel = args.parallel or base_cfg.parallel
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = _run_sweep(base_cfg, counts, transient, parallel)
    variant = _run_sweep(var_cfg, counts, transient, parallel)
    diff = compare_scenarios(base, variant)
    with open(out / "frequency_delta.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "dm", "delta_f0_tph"])
        for (m, dm) in sorted(diff.frequency_delta):
            writer.writerow([m, dm, f"{3600.0 * diff.frequency_delta[(m, dm)]:.9f}"])
    _write_json(
        out / "comparison.json",
        {
            "max_abs_frequency_delta_tph": 3600.0 * diff.max_abs_frequency_delta,
            "boundary_displacement": diff.boundary_displacement,
            "moved": list(diff.moved),
        },
    )
    print(f"wrote {out / 'frequency_delta.csv'} and {out / 'comparison.json'}")
    return 0


def _cmd_oracle_check(args) -> int:
    cfg = load_scenario(args.config)
    counts = args.counts or cfg.counts
    transient = args.transient if args.transient is not None else cfg.transient_fraction
    config = _seed(cfg, args.config)
    controls = cfg.controls()
    table = simulate(
        cfg.topology, config, demand=cfg.demand, controls=controls, counts=counts
    )
    mirror = entity_simulate(
        cfg.topology, config, demand=cfg.demand, controls=controls, counts=counts
    )
    max_dep = 0.0
    for j in range(table.n_segments):
        k = min(table.counts[j], mirror.counts[j])
        if k:
            delta = np.max(np.abs(table.departures[j][:k] - mirror.departures[j][:k]))
            max_dep = max(max_dep, float(delta))
    print(f"simulate-vs-entity: max |delta departure| = {max_dep:.12e} s")

    worst = max_dep
    ratios_zero = all(r == 0.0 for r in controls.ratio)
    if ratios_zero:
        estimate = growth_rate(table, transient_fraction=transient)
        oracle = cycle_headway(cfg.topology, config, demand=cfg.demand)
        delta_growth = abs(estimate.h0 - oracle.growth_rate)
        print(f"simulate-vs-maxplus: |delta growth| = {delta_growth:.12e} s/count")
        worst = max(worst, delta_growth)
    else:
        print("simulate-vs-maxplus: skipped (platform demand is not zero)")

    if worst > args.tol:
        print(f"oracle check FAILED: max discrepancy {worst:.3e} > tol {args.tol:.3e}")
        return 1
    print(f"oracle check passed: max discrepancy {worst:.3e} <= tol {args.tol:.3e}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="junctionsim",
        description="Junction-line traffic simulator: scenario configs to CSV/JSON artifacts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="scenario JSON file")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--counts", type=int, default=None, help="departure counts per segment")
        p.add_argument(
            "--transient", type=float, default=None, help="transient fraction cut before estimation"
        )
        p.add_argument("--parallel", type=int, default=None, help="worker processes for sweeps")

    p = sub.add_parser("validate", help="check a scenario config and print a summary")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("simulate", help="run one (m, dm) point and write departures")
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="sweep the (m, dm) grid and write the phase diagram")
    common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("boundaries", help="sweep and extract the AG/JD phase boundaries")
    common(p)
    p.set_defaults(func=_cmd_boundaries)

    p = sub.add_parser("compare", help="sweep two scenarios and report the differences")
    common(p)
    p.add_argument("--variant", required=True, help="variant scenario JSON file")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser(
        "oracle-check",
        help="cross-check the recursion engine against the entity and max-plus oracles",
    )
    common(p, out=False)
    p.add_argument(
        "--tol",
        type=float,
        default=_ORACLE_DEFAULT_TOL,
        help="maximum tolerated discrepancy (seconds)",
    )
    p.set_defaults(func=_cmd_oracle_check)

    return parser


def run_cli(argv=None) -> int:
    """Parse ``argv`` and execute one subcommand; returns the exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except JunctionSimError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


def main() -> None:
    raise SystemExit(run_cli())


__all__ = ["ScenarioConfig", "load_scenario", "run_cli", "main"]


if __name__ == "__main__":
    main()
