"""Structural tree rewrites: action splitting into client/server halves,
sequence/fallback splitting, recovery attachment, client coalescing and
full-system composition, plus the completion-trace equivalence check.

All transforms are pure tree-to-tree functions run before any ticking.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .actions import ActionClient, ActionServer, ActionWiring
from .core import Action, Fallback, Node, Parallel, Repeat, Root, Sequence

DEFAULT_PERIOD = 100


class TransformError(Exception):
    pass


@dataclass
class TreeMember:
    """One independently rooted, independently clocked tree of a system."""

    namespace: str
    root: Root
    period: int = DEFAULT_PERIOD
    role: str = "plain"  # client | server | plain


@dataclass
class AsyncParallelBT:
    """A set of free-running trees communicating only through the data
    space. It is a system, not a node: there is no aggregate status."""

    members: list = field(default_factory=list)
    wirings: list = field(default_factory=list)

    def member(self, namespace):
        for m in self.members:
            if m.namespace == namespace:
                return m
        raise KeyError(namespace)


@dataclass
class SplitResult:
    client: Node
    server: Node
    wirings: list


def _check_distinct_wirings(wirings):
    seen = set()
    for w in wirings:
        key = (w.namespace, w.action)
        if key in seen:
            raise TransformError(f"duplicate wiring {key}")
        seen.add(key)


def split_action(node, namespace):
    """Split one Action leaf into an ActionClient / ActionServer pair bound
    to the same action id under `namespace`."""
    if not isinstance(node, Action):
        raise TransformError(f"only Action leaves split, got {node.kind!r}")
    wiring = ActionWiring(namespace, node.action_id)
    client = ActionClient(node.action_id, namespace, name=node.name)
    server = ActionServer(node.action_id, name=node.name)
    return SplitResult(client, server, [wiring])


def _split_subtree(tree, namespace):
    """Copy `tree` twice, replacing every Action leaf by its client half in
    one copy and its server half in the other."""
    wirings = []

    def client_of(node):
        if isinstance(node, Action):
            result = split_action(node, namespace)
            wirings.append(result.wirings[0])
            return result.client
        clone = copy.copy(node)
        clone.children = [client_of(c) for c in node.children]
        return clone

    def server_of(node):
        if isinstance(node, Action):
            return ActionServer(node.action_id, name=node.name)
        clone = copy.copy(node)
        clone.children = [server_of(c) for c in node.children]
        return clone

    client = client_of(tree)
    if not wirings:
        raise TransformError("subtree has no Action leaf to split")
    _check_distinct_wirings(wirings)
    return client, server_of(tree), wirings


def _split_control(kind, t_l, t_m, namespace, client_period, server_period):
    client_part, server_part, wirings = _split_subtree(t_l, namespace)
    control = kind([server_part, copy.deepcopy(t_m)])
    members = [
        TreeMember(f"{namespace}-client", Root([client_part]),
                   client_period, role="client"),
        TreeMember(namespace, Root([control]), server_period, role="server"),
    ]
    return AsyncParallelBT(members, wirings)


def split_sequence(t_l, t_m, namespace, client_period=DEFAULT_PERIOD,
                   server_period=DEFAULT_PERIOD):
    """Sequence(T_l, T_m) -> AsyncParallel(T_l-client, Sequence(T_l-server, T_m))."""
    return _split_control(Sequence, t_l, t_m, namespace,
                          client_period, server_period)


def split_fallback(t_l, t_m, namespace, client_period=DEFAULT_PERIOD,
                   server_period=DEFAULT_PERIOD):
    return _split_control(Fallback, t_l, t_m, namespace,
                          client_period, server_period)


def split_many(trees, namespaces, client_period=DEFAULT_PERIOD,
               server_period=DEFAULT_PERIOD):
    """Split a bundle of two-child Sequence/Fallback trees, grouping all
    client halves on one side and all server halves on the other,
    preserving the index pairing."""
    if len(trees) != len(namespaces):
        raise TransformError("one namespace per tree required")
    if len(set(namespaces)) != len(namespaces):
        raise TransformError("duplicate namespace in bundle")
    clients, servers, wirings = [], [], []
    for tree, namespace in zip(trees, namespaces):
        if not isinstance(tree, (Sequence, Fallback)):
            raise TransformError(
                f"bundle entries must be Sequence or Fallback, got {tree.kind!r}")
        if len(tree.children) < 2:
            raise TransformError("bundle entries need at least two children")
        t_l, rest = tree.children[0], tree.children[1:]
        client_part, server_part, ws = _split_subtree(t_l, namespace)
        wirings.extend(ws)
        clients.append(TreeMember(f"{namespace}-client", Root([client_part]),
                                  client_period, role="client"))
        control = type(tree)([server_part] + [copy.deepcopy(c) for c in rest])
        servers.append(TreeMember(namespace, Root([control]),
                                  server_period, role="server"))
    _check_distinct_wirings(wirings)
    return AsyncParallelBT(clients + servers, wirings)


def attach_recovery(task, recovery, tpu_namespace, robot_namespace,
                    client_period=DEFAULT_PERIOD, server_period=DEFAULT_PERIOD):
    """Fallback(task, recovery) -> AsyncParallel(task-client at the planner,
    Fallback(task-server, recovery) at the robot). The server's published
    Failure is what routes the robot-side fallback into recovery."""
    client_part, server_part, wirings = _split_subtree(task, robot_namespace)
    members = [
        TreeMember(tpu_namespace, Root([client_part]), client_period,
                   role="client"),
        TreeMember(robot_namespace, Root([Fallback([server_part, recovery])]),
                   server_period, role="server"),
    ]
    return AsyncParallelBT(members, wirings)


def client_wirings(tree):
    found = []

    def walk(node):
        if isinstance(node, ActionClient):
            found.append(node.wiring)
        for c in node.children:
            walk(c)

    walk(tree)
    return found


def coalesce_clients(clients):
    """Merge N independent client trees under one root and one clock via a
    Parallel node tolerating N-1 failures, so one robot's fault never
    halts the others. N=1 passes the single tree through unchanged."""
    if not clients:
        raise TransformError("nothing to coalesce")
    stripped = [t.children[0] if isinstance(t, Root) else t for t in clients]
    wiring_sets = [set((w.namespace, w.action) for w in client_wirings(t))
                   for t in stripped]
    for i in range(len(wiring_sets)):
        for j in range(i + 1, len(wiring_sets)):
            overlap = wiring_sets[i] & wiring_sets[j]
            if overlap:
                raise TransformError(f"overlapping client wiring {overlap}")
    if len(stripped) == 1:
        return Root([stripped[0]])
    return Root([Parallel(len(stripped) - 1, stripped, name="tpu")])


def compose_system(tasks, recoveries, tpu_namespace, robot_namespaces,
                   client_period=DEFAULT_PERIOD, server_period=DEFAULT_PERIOD):
    """Full topology: one coalesced client tree at the planning unit plus
    one Fallback(task-server, recovery) tree per robot."""
    if not (len(tasks) == len(recoveries) == len(robot_namespaces)):
        raise TransformError("tasks, recoveries and namespaces must pair up")
    if len(set(robot_namespaces)) != len(robot_namespaces):
        raise TransformError("duplicate robot namespace")
    clients, members, wirings = [], [], []
    for task, recovery, namespace in zip(tasks, recoveries, robot_namespaces):
        client_part, server_part, ws = _split_subtree(task, namespace)
        wirings.extend(ws)
        clients.append(client_part)
        members.append(
            TreeMember(namespace, Root([Fallback([server_part, recovery])]),
                       server_period, role="server"))
    _check_distinct_wirings(wirings)
    tpu_root = coalesce_clients(clients)
    members.insert(0, TreeMember(tpu_namespace, tpu_root, client_period,
                                 role="client"))
    return AsyncParallelBT(members, wirings)


def collapse(system):
    """Undo a split: the server-side trees with every ActionServer replaced
    by the original Action leaf reproduce the pre-split structure."""

    def restore(node):
        if isinstance(node, ActionServer):
            return Action(node.action, name=node.name)
        clone = copy.copy(node)
        clone.children = [restore(c) for c in node.children]
        return clone

    servers = [m for m in system.members if m.role == "server"]
    restored = [restore(m.root.children[0]) for m in servers]
    return restored[0] if len(restored) == 1 else restored


def structurally_equal(a, b):
    if type(a) is not type(b) or len(a.children) != len(b.children):
        return False
    if isinstance(a, Action) and a.action_id != b.action_id:
        return False
    if isinstance(a, Parallel) and a.failure_threshold != b.failure_threshold:
        return False
    if isinstance(a, Repeat) and a.times != b.times:
        return False
    return all(structurally_equal(x, y) for x, y in zip(a.children, b.children))


def completion_events(records, projection):
    """Ordered (action, status) completions of one namespace in a trace."""
    return [(r["action"], r["status"]) for r in records
            if r.get("kind") == "completion"
            and r.get("namespace") == projection]


def trace_equivalence(run_a, run_b, projection):
    """True iff both runs produced the same ordered completion events under
    `projection`. Only deterministic-mode traces are comparable."""
    for run in (run_a, run_b):
        header = next((r for r in run if r.get("kind") == "header"), None)
        if header is not None and header.get("mode") != "deterministic":
            raise TransformError("trace equivalence needs deterministic traces")
    return (completion_events(run_a, projection)
            == completion_events(run_b, projection))


def command_stream(records, namespace, action):
    """Distinct consecutive command payloads published to one robot's
    command topic."""
    topic = ActionWiring(namespace, action).topic("cmd")
    stream = []
    for r in records:
        if r.get("kind") == "publish" and r.get("topic") == topic:
            value = r["value"].get("value")
            if not stream or stream[-1] != value:
                stream.append(value)
    return stream
