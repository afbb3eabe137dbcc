"""Tick-driven behavior-tree engine: nodes, virtual clock, blackboard.

Trees are memoryless: every tick restarts at the first child of each
control node, so leaves that take several ticks must hold their own
progress (actions latch completion, conditions re-evaluate).
"""
from __future__ import annotations

from dataclasses import dataclass, field


class Status:
    """Three-valued tick result. Values double as wire/trace encoding."""

    RUNNING = "R"
    SUCCESS = "S"
    FAILURE = "F"

    ALL = (RUNNING, SUCCESS, FAILURE)


class BTError(Exception):
    pass


class StructureError(BTError):
    """Tree invariant violated; raised before any tick runs."""


class BlackboardError(BTError):
    """Read of an unset blackboard key."""


@dataclass
class TickClock:
    """Per-tree virtual clock; one clock per tree, advanced once per tick."""

    period: int = 100
    time: int = 0
    index: int = 0

    def advance(self):
        self.time += self.period
        self.index += 1


class Blackboard:
    """Per-tree key/value store. Missing keys are an error, never a default."""

    def __init__(self):
        self._entries = {}

    def set(self, key, value):
        self._entries[key] = value

    def get(self, key):
        if key not in self._entries:
            raise BlackboardError(f"blackboard key {key!r} is unset")
        return self._entries[key]

    def contains(self, key):
        return key in self._entries

    def snapshot(self):
        return dict(self._entries)


class Context:
    """Execution context handed to every node tick.

    Carries the tree's blackboard and clock plus the registries leaves
    resolve against (predicates, executors) and the bus participant used
    by action clients/servers.
    """

    def __init__(self, namespace="", blackboard=None, predicates=None,
                 executors=None, participant=None, trace=None):
        self.namespace = namespace
        self.blackboard = blackboard if blackboard is not None else Blackboard()
        self.predicates = predicates if predicates is not None else {}
        self.executors = executors if executors is not None else {}
        self.participant = participant
        self.trace = trace
        self.clock = None  # bound by tick_tree

    @property
    def now(self):
        return self.clock.time if self.clock is not None else 0

    @property
    def tick_index(self):
        return self.clock.index if self.clock is not None else 0

    def emit(self, kind, **payload):
        if self.trace is not None:
            self.trace.emit(kind, namespace=self.namespace, **payload)


class Node:
    """Base tree node: a name, ordered children, and a tick method."""

    kind = "node"

    def __init__(self, children=(), name=None):
        self.children = list(children)
        self.name = name if name is not None else self.kind

    def tick(self, ctx) -> str:
        raise NotImplementedError

    def reset(self):
        for child in self.children:
            child.reset()

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class Root(Node):
    kind = "root"

    def tick(self, ctx):
        return self.children[0].tick(ctx)


class Sequence(Node):
    kind = "sequence"

    def tick(self, ctx):
        for child in self.children:
            status = child.tick(ctx)
            if status != Status.SUCCESS:
                return status
        return Status.SUCCESS


class Fallback(Node):
    kind = "fallback"

    def tick(self, ctx):
        for child in self.children:
            status = child.tick(ctx)
            if status != Status.FAILURE:
                return status
        return Status.FAILURE


def sequence_status(statuses):
    """Pure aggregation rule of a sequence over already-known child statuses."""
    for status in statuses:
        if status != Status.SUCCESS:
            return status
    return Status.SUCCESS


def fallback_status(statuses):
    for status in statuses:
        if status != Status.FAILURE:
            return status
    return Status.FAILURE


def parallel_status(statuses, failure_threshold):
    """Failure once more than `failure_threshold` children fail; Success when
    every non-failed child has succeeded; Running otherwise."""
    failed = sum(1 for s in statuses if s == Status.FAILURE)
    if failed > failure_threshold:
        return Status.FAILURE
    if Status.RUNNING in statuses:
        return Status.RUNNING
    return Status.SUCCESS


class Parallel(Node):
    kind = "parallel"

    def __init__(self, failure_threshold, children=(), name=None):
        super().__init__(children, name)
        self.failure_threshold = failure_threshold

    def tick(self, ctx):
        statuses = [child.tick(ctx) for child in self.children]
        return parallel_status(statuses, self.failure_threshold)


class Repeat(Node):
    """Decorator: re-run the child `times` times (None means forever).

    The child is reset after each successful iteration; a child failure
    propagates immediately.
    """

    kind = "repeat"

    def __init__(self, child, times=None, name=None):
        super().__init__([child], name)
        self.times = times
        self._completed = 0

    @property
    def child(self):
        return self.children[0]

    def reset(self):
        self._completed = 0
        super().reset()

    def tick(self, ctx):
        if self.times == 0:
            return Status.SUCCESS
        status = self.child.tick(ctx)
        if status == Status.FAILURE:
            self._completed = 0
            return Status.FAILURE
        if status == Status.SUCCESS:
            self._completed += 1
            self.child.reset()
            if self.times is not None and self._completed >= self.times:
                self._completed = 0
                return Status.SUCCESS
        return Status.RUNNING


class Condition(Node):
    """Leaf evaluating a registered predicate; never returns Running."""

    kind = "condition"

    def __init__(self, predicate_id, name=None):
        super().__init__((), name or predicate_id)
        self.predicate_id = predicate_id

    def tick(self, ctx):
        predicate = ctx.predicates.get(self.predicate_id)
        if predicate is None:
            raise StructureError(f"predicate {self.predicate_id!r} not registered")
        return Status.SUCCESS if predicate(ctx) else Status.FAILURE


class Action(Node):
    """Leaf running a registered executor in place (no client/server split).

    The executor is started once per node run and keeps its own progress;
    the first terminal status is logged as a completion event.
    """

    kind = "action"

    def __init__(self, action_id, name=None):
        super().__init__((), name or action_id)
        self.action_id = action_id
        self._started = False
        self._completion_logged = False

    def reset(self):
        self._started = False
        self._completion_logged = False

    def tick(self, ctx):
        executor = ctx.executors.get(self.action_id)
        if executor is None:
            raise StructureError(f"executor {self.action_id!r} not registered")
        if not self._started:
            executor.begin(None)
            self._started = True
        status = executor.tick(ctx)
        if status != Status.RUNNING and not self._completion_logged:
            ctx.emit("completion", action=self.action_id, status=status)
            self._completion_logged = True
        return status


class SetBlackboard(Node):
    """Leaf storing a value on the tree blackboard; always succeeds."""

    kind = "set-blackboard"

    def __init__(self, key, value, name=None):
        super().__init__((), name or f"set:{key}")
        self.key = key
        self.value = value

    def tick(self, ctx):
        ctx.blackboard.set(self.key, self.value)
        return Status.SUCCESS


_LEAF_KINDS = ("condition", "action", "action-client", "action-server",
               "set-blackboard")


def validate_tree(root, path="root"):
    """Check structural invariants, raising StructureError with a node path."""
    if not isinstance(root, Root):
        raise StructureError(f"{path}: tree must be rooted at a Root node")
    if len(root.children) != 1:
        raise StructureError(
            f"{path}: Root needs exactly one child, has {len(root.children)}")
    _validate_node(root.children[0], f"{path}/{root.children[0].name}")


def _validate_node(node, path):
    if isinstance(node, Root):
        raise StructureError(f"{path}: nested Root node")
    n = len(node.children)
    if node.kind in _LEAF_KINDS:
        if n != 0:
            raise StructureError(f"{path}: leaf node has {n} children")
    elif isinstance(node, (Sequence, Fallback)):
        if n < 1:
            raise StructureError(f"{path}: {node.kind} needs at least one child")
    elif isinstance(node, Parallel):
        if n < 2:
            raise StructureError(f"{path}: parallel needs at least two children")
        if not (0 <= node.failure_threshold < n):
            raise StructureError(
                f"{path}: parallel threshold {node.failure_threshold} "
                f"outside [0, {n})")
    elif isinstance(node, Repeat):
        if n != 1:
            raise StructureError(f"{path}: repeat needs exactly one child")
        if node.times is not None and node.times < 0:
            raise StructureError(f"{path}: repeat count must be >= 0")
    elif getattr(node, "is_decorator", False):
        if n != 1:
            raise StructureError(
                f"{path}: {node.kind} decorator needs exactly one child")
    else:
        raise StructureError(f"{path}: unknown node kind {node.kind!r}")
    for child in node.children:
        _validate_node(child, f"{path}/{child.name}")


def tick_tree(root, clock, ctx):
    """Advance the tree clock by one period and tick the root's child."""
    if not getattr(root, "_validated", False):
        validate_tree(root)
        root._validated = True
    clock.advance()
    ctx.clock = clock
    return root.tick(ctx)
