"""Scenario execution: builds the full client/server system from a
scenario document, drives the deterministic scheduler, and summarizes the
resulting trace.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .agents import (build_navigation_bt, build_recovery_bt, build_tpu,
                     battery_predicates)
from .bus import GlobalDataSpace
from .core import Blackboard, Context, Fallback, Root
from .scheduler import (DeterministicScheduler, InvariantViolation, Trace)
from .transform import AsyncParallelBT, TreeMember
from .world import (FaultRejected, RobotState, apply_fault, battery_step,
                    load_map_file)

TPU_NAMESPACE = "tpu"


@dataclass
class RunResult:
    exit_code: int
    summary: dict
    trace: Trace
    violation: str = None


@dataclass
class ScenarioSystem:
    doc: object
    grid: object
    robots: dict
    domain: GlobalDataSpace
    scheduler: DeterministicScheduler
    trace: Trace
    members: list = field(default_factory=list)


def build_scenario_system(doc, strict_collisions=False):
    """Wire up grid, robots, planning-unit and robot trees for one run."""
    grid = load_map_file(doc.map_path)
    trace = Trace()
    domain = GlobalDataSpace(trace=trace)
    scheduler = DeterministicScheduler(domain, trace=trace,
                                       base_period=min(
                                           [doc.tpu_period]
                                           + [r.tick_period for r in doc.robots]))
    robots = {}

    # Planning unit: one coalesced tree, one participant, one blackboard.
    tpu_root = build_tpu([r.goals for r in doc.robots],
                         [r.namespace for r in doc.robots])
    tpu_ctx = Context(namespace=TPU_NAMESPACE, blackboard=Blackboard(),
                      participant=domain.join(TPU_NAMESPACE), trace=trace)
    tpu_member = TreeMember(TPU_NAMESPACE, tpu_root, doc.tpu_period,
                            role="client")
    scheduler.add_member(tpu_member, tpu_ctx)
    members = [tpu_member]

    for spec in doc.robots:
        robot = RobotState(namespace=spec.namespace,
                           pose=(spec.start[0], spec.start[1], 0.0),
                           backup_position=spec.backup)
        robots[spec.namespace] = robot
        server = build_navigation_bt(spec.namespace, robot, grid)
        recovery = build_recovery_bt(spec.namespace, robot, grid)
        root = Root([Fallback([server, recovery])])
        ctx = Context(namespace=spec.namespace, blackboard=Blackboard(),
                      predicates=battery_predicates(robot), trace=trace)
        member = TreeMember(spec.namespace, root, spec.tick_period,
                            role="server")
        if spec.join_tick > 0:
            scheduler.add_member(member, ctx, join_tick=spec.join_tick,
                                 pre_tick=_battery_hook(robot),
                                 join_namespace=spec.namespace)
        else:
            ctx.participant = domain.join(spec.namespace)
            scheduler.add_member(member, ctx, pre_tick=_battery_hook(robot))
        members.append(member)

    for fault in doc.faults:
        scheduler.add_fault(fault.tick,
                            lambda f=fault: apply_fault(f, grid, robots),
                            description=fault.describe())

    scheduler.add_invariant(_pose_safety_check(grid, robots))
    if strict_collisions:
        scheduler.add_invariant(_collision_warning(trace, robots))
    return ScenarioSystem(doc, grid, robots, domain, scheduler, trace, members)


def _battery_hook(robot):
    def hook(entry, time):
        battery_step(robot)
    return hook


def _pose_safety_check(grid, robots):
    def check(time):
        for robot in robots.values():
            if robot.cell in grid.static_cells:
                raise InvariantViolation(
                    f"{robot.namespace} on occupied cell {robot.cell} "
                    f"at time {time}")
    return check


def _collision_warning(trace, robots):
    def check(time):
        seen = {}
        for robot in robots.values():
            other = seen.get(robot.cell)
            if other is not None:
                trace.emit("collision-warning", namespace=robot.namespace,
                           cell=list(robot.cell), other=other)
            seen[robot.cell] = robot.namespace
    return check


def _cycles_stop(doc, cycles):
    """Stop once every robot's arrival log covers `cycles` full goal lists."""
    goal_lens = {r.namespace: len(r.goals) for r in doc.robots}
    counts = {ns: 0 for ns in goal_lens}
    cursor = {"i": 0}

    def stop(trace):
        records = trace.records
        i = cursor["i"]
        while i < len(records):
            r = records[i]
            if r.get("kind") == "arrival" and r.get("namespace") in counts:
                counts[r["namespace"]] += 1
            i += 1
        cursor["i"] = i
        return all(counts[ns] >= cycles * goal_lens[ns] for ns in counts)

    return stop


def visit_log(records, namespace):
    return [tuple(r["goal"]) for r in records
            if r.get("kind") == "arrival" and r.get("namespace") == namespace]


def summarize(doc, records):
    """Per-robot visit logs, cycle counts, recovery and rejection counts."""
    robots = {}
    rejected = sum(1 for r in records
                   if r.get("kind") == "response"
                   and r.get("value", {}).get("response") == "command-rejected")
    for spec in doc.robots:
        visits = visit_log(records, spec.namespace)
        goals = [tuple(g) for g in spec.goals]
        cycles = 0
        ordered = True
        for i, visit in enumerate(visits):
            if visit != goals[i % len(goals)]:
                ordered = False
                break
        if ordered:
            cycles = len(visits) // len(goals)
        recoveries = sum(1 for r in records
                         if r.get("kind") == "recovery-enter"
                         and r.get("namespace") == spec.namespace)
        robots[spec.namespace] = {
            "visits": [list(v) for v in visits],
            "cycles": cycles,
            "ordered": ordered,
            "recoveries": recoveries,
        }
    return {"robots": robots, "rejected_requests": rejected}


def run_scenario(doc, max_ticks=None, cycles=None, strict_collisions=False,
                 seed=None, stop=None):
    """Execute one scenario deterministically and return the run result."""
    system = build_scenario_system(doc, strict_collisions=strict_collisions)
    trace = system.trace
    trace.header(mode="deterministic",
                 seed=doc.seed if seed is None else seed,
                 map=str(doc.map_path))
    ticks = max_ticks if max_ticks is not None else doc.max_ticks
    stop_fn = stop
    if stop_fn is None:
        wanted = cycles if cycles is not None else doc.cycles
        if wanted is not None:
            stop_fn = _cycles_stop(doc, wanted)
    violation = None
    try:
        system.scheduler.run(ticks, stop=stop_fn)
    except InvariantViolation as exc:
        violation = str(exc)
    if system.domain.violations:
        violation = violation or f"single-writer violations: {system.domain.violations}"
    summary = summarize(doc, trace.records)
    summary["robot_states"] = {
        ns: {"pose": [r.pose[0], r.pose[1], round(r.pose[2], 6)],
             "battery": round(r.battery, 4)}
        for ns, r in system.robots.items()
    }
    exit_code = 3 if violation else 0
    return RunResult(exit_code, summary, trace, violation)


# --------------------------------------------------------------------------
# Generic system runs (used by the transform equivalence harness)
# --------------------------------------------------------------------------

def run_members(members, executors=None, max_ticks=200, halt_on_done=True,
                domain=None, blackboards=None, header=True):
    """Tick a list of TreeMembers to completion on one virtual clock.

    `executors` maps action id -> executor factory (callable returning a
    fresh executor) or executor instance, installed into every member's
    context. `blackboards` optionally maps namespace -> shared Blackboard.
    """
    trace = Trace()
    if domain is None:
        domain = GlobalDataSpace(trace=trace)
    scheduler = DeterministicScheduler(
        domain, trace=trace,
        base_period=min(m.period for m in members),
        halt_on_done=halt_on_done)
    for member in members:
        registry = {}
        if executors:
            for action, executor in executors.items():
                registry[action] = executor() if callable(executor) else executor
        blackboard = None
        if blackboards is not None:
            blackboard = blackboards.get(member.namespace)
        ctx = Context(namespace=member.namespace,
                      blackboard=blackboard or Blackboard(),
                      executors=registry,
                      participant=domain.join(member.namespace),
                      trace=trace)
        scheduler.add_member(member, ctx)
    if header:
        trace.header(mode="deterministic", seed=0)
    scheduler.run(max_ticks)
    return trace


def run_system(system: AsyncParallelBT, executors=None, max_ticks=200,
               halt_on_done=True):
    return run_members(system.members, executors=executors,
                       max_ticks=max_ticks, halt_on_done=halt_on_done)
