"""Deterministic virtual-clock scheduler and the line-delimited trace log.

All trees of a run are interleaved by clock order, ties broken first by
scheduled faults, then by namespace lexicographic order. One tree tick is
atomic. The global "tick" stamped on trace records is virtual time divided
by the base period.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

from .core import Context, Status, TickClock, tick_tree

BASE_PERIOD = 100


class Trace:
    """Append-only event log; records are plain dicts, serialized as
    canonical JSONL so identical runs produce identical bytes."""

    def __init__(self):
        self.records = []
        self._tick = 0
        self._time = 0
        self._namespace = ""

    def set_context(self, tick, time, namespace):
        self._tick = tick
        self._time = time
        self._namespace = namespace

    def emit(self, kind, namespace=None, **payload):
        record = {
            "tick": self._tick,
            "time": self._time,
            "namespace": namespace if namespace is not None else self._namespace,
            "kind": kind,
        }
        record.update(payload)
        self.records.append(record)

    def header(self, **fields):
        self.records.insert(0, {"kind": "header", **fields})

    def dumps(self):
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":"))
                       + "\n" for r in self.records)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())


def load_trace(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


@dataclass
class _Scheduled:
    member: object
    ctx: Context
    clock: TickClock
    halted: bool = False
    pre_tick: object = None
    post_tick: object = None
    joined: bool = False
    join_time: int = 0
    join_namespace: str = None
    last_announce: int = None


@dataclass
class _Fault:
    time: int
    apply: object
    description: dict = field(default_factory=dict)


class InvariantViolation(Exception):
    pass


class DeterministicScheduler:
    """Drives an AsyncParallelBT (or any set of members) on virtual time."""

    def __init__(self, domain, trace=None, base_period=BASE_PERIOD,
                 halt_on_done=False):
        self.domain = domain
        self.trace = trace if trace is not None else Trace()
        if domain is not None:
            domain.trace = self.trace
        self.base_period = base_period
        self.halt_on_done = halt_on_done
        self._entries = []
        self._faults = []
        self._invariants = []

    def add_member(self, member, ctx, join_tick=0, pre_tick=None,
                   post_tick=None, join_namespace=None):
        """Schedule one tree. With `join_namespace`, the bus participant is
        created lazily at the member's first tick (mid-run discovery)."""
        join_time = join_tick * self.base_period
        clock = TickClock(period=member.period, time=join_time)
        self._entries.append(_Scheduled(member, ctx, clock,
                                        pre_tick=pre_tick, post_tick=post_tick,
                                        join_time=join_time,
                                        join_namespace=join_namespace))

    def add_fault(self, tick, apply_fn, description=None):
        self._faults.append(_Fault(tick * self.base_period, apply_fn,
                                   description or {}))

    def add_invariant(self, check):
        """check(time) raises InvariantViolation to abort the run."""
        self._invariants.append(check)

    def run(self, max_ticks, stop=None):
        """Run until max_ticks rounds elapse, every tree halted, or `stop`
        (called after each tree tick with the trace) returns True."""
        max_time = max_ticks * self.base_period
        heap = []
        for i, entry in enumerate(self._entries):
            heapq.heappush(heap, (entry.join_time + entry.clock.period,
                                  entry.member.namespace, i))
        faults = sorted(self._faults, key=lambda f: f.time)
        fault_i = 0
        while heap:
            time, namespace, i = heap[0]
            if time > max_time:
                break
            # Faults due at or before this instant apply first.
            if fault_i < len(faults) and faults[fault_i].time <= time:
                fault = faults[fault_i]
                fault_i += 1
                tick = fault.time // self.base_period
                self.trace.set_context(tick, fault.time, "")
                try:
                    fault.apply()
                    self.trace.emit("fault", **fault.description)
                except Exception as exc:  # noqa: BLE001 - reported, run continues
                    self.trace.emit("fault", rejected=str(exc),
                                    **fault.description)
                continue
            heapq.heappop(heap)
            entry = self._entries[i]
            if entry.halted:
                continue
            tick = time // self.base_period
            self.trace.set_context(tick, time, entry.member.namespace)
            self._prepare(entry, time)
            if entry.pre_tick is not None:
                entry.pre_tick(entry, time)
            status = tick_tree(entry.member.root, entry.clock, entry.ctx)
            self.trace.emit("tick-status", status=status)
            if entry.post_tick is not None:
                entry.post_tick(entry, time, status)
            for check in self._invariants:
                check(time)
            if self.halt_on_done and status != Status.RUNNING:
                entry.halted = True
            else:
                heapq.heappush(heap, (time + entry.clock.period,
                                      namespace, i))
            if stop is not None and stop(self.trace):
                break
        return self.trace

    def _prepare(self, entry, time):
        """Lazy join plus periodic liveliness announcements."""
        if self.domain is None:
            return
        if entry.ctx.participant is None and entry.join_namespace is not None:
            entry.ctx.participant = self.domain.join(entry.join_namespace,
                                                     now=time)
        participant = entry.ctx.participant
        if participant is None:
            return
        if not entry.joined:
            entry.joined = True
            entry.last_announce = time
            return
        period = self.domain.announce_period
        if entry.last_announce is None or time - entry.last_announce >= period:
            participant.announce(time)
            entry.last_announce = time
