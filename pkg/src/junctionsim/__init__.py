"""Simulation and analysis of a metro line with a symmetrically served junction.

The package models a central trunk joined to two branches, with single-train
block segments, demand-dependent dwell control, and strict 1:1 alternation
of branch service at the junction.  It provides:

* an event recursion engine over per-segment departure counts
  (:mod:`.engine`), with a compiled kernel and a pure-Python fallback;
* an independent entity-level oracle simulation (:mod:`.entity`);
* a max-plus algebra core whose eigenvalue reproduces the asymptotic
  timetable growth rate (:mod:`.maxplus`);
* growth-rate estimation, operating-phase classification, parameter sweeps
  and phase-boundary extraction (:mod:`.analysis`);
* a command-line interface (:mod:`.cli`).
"""

from .analysis import (
    BindingCensus,
    Boundary,
    GridPoint,
    GrowthRateEstimate,
    PhaseDiagram,
    PhaseLabel,
    ScenarioDiff,
    binding_census,
    boundaries_to_csv,
    boundary_displacement,
    capacity_headway,
    classify_phase,
    compare_scenarios,
    diagram_to_csv,
    extract_boundaries,
    feasible_grid,
    growth_rate,
    sweep,
)
from .cli import run_cli
from .control import (
    ControlParams,
    DemandProfile,
    DwellOutcome,
    control_params,
    controlled_run_time,
    dwell_time,
)
from .engine import (
    DepartureTable,
    EngineState,
    simulate,
    table_prefix_equal,
)
from .entity import entity_simulate
from .errors import (
    ConfigError,
    ConfigParse,
    Deadlock,
    DemandNotZero,
    DimensionMismatch,
    EmptyPart,
    GridMismatch,
    InfeasibleSeed,
    InsufficientData,
    JunctionSimError,
    MarginViolation,
    MissingRegion,
    NegativeInterval,
    NonPositiveRunTime,
    NotStronglyConnected,
    SaturatedPlatform,
    Unclassifiable,
    WindowTooShort,
)
from .kernels import active_backend, compiled_available
from .maxplus import (
    CycleTimeResult,
    MaxPlusMatrix,
    cycle_headway,
    cycle_time,
    first_order_matrix,
    howard_cycle_time,
    kleene_star,
    mp_multiply,
)
from .topology import (
    Direction,
    LineTopology,
    Part,
    PlatformParams,
    Segment,
    TrainConfiguration,
    build_desk_line,
    build_line,
    capacity,
    circuit_populations,
    desk_demand_line,
    desk_line,
    desk_phase_line,
    junction_offsets,
    make_configuration,
    seed_trains,
)

__version__ = "0.1.0"
