"""Topology-aware hierarchical scheduling library and deterministic simulator."""

from .entities import (
    Bubble,
    BubbleStats,
    Task,
    TaskState,
    bubble_stats,
    create_bubble,
    explode,
    insert_entity,
    remove_entity,
    set_load,
)
from .selfsched import SchedulerHooks, default_bubble_hook, pick_next, requeue_on_finish
from .simulation import CostModel, SimReport, SimulationError, compute_speedup, run_simulation, segment_time
from .spread import (
    BubbleSpread,
    PlacementLog,
    RoundRobinLeaves,
    SharedRoot,
    SpreadParams,
    apply_strategy,
    rebalance_on_team_event,
    spread,
    spread_weight,
)
from .topology import (
    LevelKind,
    PRESETS,
    Runqueue,
    Topology,
    TopologySpec,
    build_topology,
    numa_factor,
    runqueues_spanning,
)
from .workload import Workload, World, gen_btmz_analog, gen_uniform, instantiate

__version__ = "0.1.0"
