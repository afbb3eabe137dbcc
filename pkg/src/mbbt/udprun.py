"""Wall-clock scenario execution over the UDP multicast transport: one
free-running thread per tree, each with its own replica of the data space.
Nondeterministic by construction; traces carry mode "udp".
"""
from __future__ import annotations

import threading
import time as wall

from .agents import build_navigation_bt, build_recovery_bt, build_tpu, \
    battery_predicates
from .core import Blackboard, Context, Fallback, Root, TickClock, tick_tree
from .runner import TPU_NAMESPACE
from .scheduler import Trace
from .udp import UdpParticipant
from .world import RobotState, apply_fault, battery_step, load_map_file

# Wall seconds per virtual time unit (a 100-unit tick period -> 20 ms).
TIME_SCALE = 0.0002


class _LockedTrace(Trace):
    def __init__(self):
        super().__init__()
        self._lock = threading.Lock()

    def emit(self, kind, namespace=None, **payload):
        with self._lock:
            super().emit(kind, namespace=namespace, **payload)


def run_scenario_udp(doc, duration_s=5.0, group=None, port=None):
    """Run the scenario's trees over UDP for a fixed wall duration."""
    grid = load_map_file(doc.map_path)
    trace = _LockedTrace()
    trace.header(mode="udp", seed=doc.seed, map=str(doc.map_path))
    stop = threading.Event()
    threads = []
    participants = []
    robots = {}

    def spawn(namespace, root, period, ctx, pre_tick=None, delay=0.0):
        def loop():
            if delay:
                if stop.wait(delay):
                    return
            clock = TickClock(period=period)
            while not stop.is_set():
                if pre_tick is not None:
                    pre_tick()
                trace.set_context(clock.index, clock.time, namespace)
                status = tick_tree(root, clock, ctx)
                trace.emit("tick-status", namespace=namespace, status=status)
                if stop.wait(period * TIME_SCALE):
                    return

        thread = threading.Thread(target=loop, daemon=True, name=namespace)
        threads.append(thread)
        thread.start()

    kwargs = {}
    if group:
        kwargs["group"] = group
    if port:
        kwargs["port"] = port

    for spec in doc.robots:
        robot = RobotState(namespace=spec.namespace,
                           pose=(spec.start[0], spec.start[1], 0.0),
                           backup_position=spec.backup)
        robots[spec.namespace] = robot
        participant = UdpParticipant(spec.namespace, **kwargs)
        participants.append(participant)
        ctx = Context(namespace=spec.namespace, blackboard=Blackboard(),
                      predicates=battery_predicates(robot),
                      participant=participant, trace=trace)
        root = Root([Fallback([
            build_navigation_bt(spec.namespace, robot, grid),
            build_recovery_bt(spec.namespace, robot, grid),
        ])])
        spawn(spec.namespace, root, spec.tick_period, ctx,
              pre_tick=lambda r=robot: battery_step(r),
              delay=spec.join_tick * 100 * TIME_SCALE)

    tpu_participant = UdpParticipant(TPU_NAMESPACE, **kwargs)
    participants.append(tpu_participant)
    tpu_ctx = Context(namespace=TPU_NAMESPACE, blackboard=Blackboard(),
                      participant=tpu_participant, trace=trace)
    tpu_root = build_tpu([r.goals for r in doc.robots],
                         [r.namespace for r in doc.robots])
    spawn(TPU_NAMESPACE, tpu_root, doc.tpu_period, tpu_ctx)

    for fault in doc.faults:
        timer = threading.Timer(fault.tick * 100 * TIME_SCALE,
                                lambda f=fault: _apply(f, grid, robots, trace))
        timer.daemon = True
        timer.start()

    wall.sleep(duration_s)
    stop.set()
    for thread in threads:
        thread.join(timeout=1.0)
    for participant in participants:
        participant.close()
    return trace


def _apply(fault, grid, robots, trace):
    try:
        apply_fault(fault, grid, robots)
        trace.emit("fault", namespace="", **fault.describe())
    except Exception as exc:  # noqa: BLE001
        trace.emit("fault", namespace="", rejected=str(exc),
                   **fault.describe())
