"""Simulation and verification of firing squad synchronization in
hyperdag and symmetric neural P systems."""

from .engine import (
    Cell,
    ChannelPolicy,
    Dest,
    Mode,
    NonTerminationError,
    Rule,
    RuleProgram,
    SystemConfig,
    Trace,
    apply_cell,
    effective_neighbors,
    make_config,
    run,
    step,
)
from .fssp import (
    FsspInstance,
    Variant,
    build_dynamic_instance,
    build_static_instance,
    expected_firing_step,
    fuzz,
    verify_phase_postconditions,
    verify_run,
)
from .multiset import Multiset
from .topology import (
    Kind,
    LevelTable,
    Topology,
    bfs_levels,
    brute_force_counts,
    build_topology,
    load_topology,
)

__version__ = "0.1.0"
