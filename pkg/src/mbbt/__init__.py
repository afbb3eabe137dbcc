"""Behavior-tree task planning for fleets of simulated robots.

Trees talk to each other through a shared publish/subscribe data space:
clients hold the control flow, servers own the long-running work, and a
deterministic scheduler interleaves everything on one virtual clock so a
whole multi-robot run can be replayed byte for byte.
"""
from .core import (Action, Blackboard, BlackboardError, Condition, Context,
                   Fallback, Parallel, Repeat, Root, Sequence, SetBlackboard,
                   Status, StructureError, TickClock, tick_tree, validate_tree)
from .bus import GlobalDataSpace, RoleViolationError, resolve_topic
from .actions import (ActionClient, ActionServer, BlackboardCommand,
                      DurationExecutor, Executor, StaticCommand, command_hash)
from .transform import (AsyncParallelBT, TreeMember, attach_recovery,
                        coalesce_clients, collapse, compose_system,
                        split_action, split_fallback, split_many,
                        split_sequence, trace_equivalence)
from .scheduler import DeterministicScheduler, InvariantViolation, Trace
from .world import (FaultSpec, GridError, OccupancyGrid, RobotState,
                    load_map, plan_global)
from .dsl import ParseError, parse_scenario, parse_tree, serialize_tree
from .runner import run_scenario, run_system

__version__ = "0.1.0"

__all__ = [
    "Action", "ActionClient", "ActionServer", "AsyncParallelBT",
    "Blackboard", "BlackboardError", "BlackboardCommand", "Condition",
    "Context", "DeterministicScheduler", "DurationExecutor", "Executor",
    "Fallback", "FaultSpec", "GlobalDataSpace", "GridError",
    "InvariantViolation", "OccupancyGrid", "Parallel", "ParseError",
    "Repeat", "RobotState", "RoleViolationError", "Root", "Sequence",
    "SetBlackboard", "StaticCommand", "Status", "StructureError",
    "TickClock", "Trace", "TreeMember", "attach_recovery",
    "coalesce_clients", "collapse", "command_hash", "compose_system",
    "load_map", "parse_scenario", "parse_tree", "plan_global",
    "resolve_topic", "run_scenario", "run_system", "serialize_tree",
    "split_action", "split_fallback", "split_many", "split_sequence",
    "tick_tree", "trace_equivalence", "validate_tree",
]
