"""Textual formats: s-expression trees (`.bt`) and scenario files (`.scn`).

Tree grammar (keywords only, `#` starts a line comment):

    (root (sequence (action navigate)
                    (fallback (condition battery-fair) (action spin))))

    root, sequence, fallback, parallel :m K, repeat :times K|inf,
    condition NAME, action NAME, action-client NAME @NAMESPACE [:key KEY],
    action-server NAME, set-blackboard KEY VALUE

Scenario files are sectioned key/value text; see `parse_scenario`.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

from .actions import ActionClient, ActionServer, BlackboardCommand
from .core import (Action, Condition, Fallback, Parallel, Repeat, Root,
                   Sequence, SetBlackboard, StructureError, validate_tree)
from .world import FaultSpec, GridError, load_map_file


class ParseError(Exception):
    def __init__(self, message, line=None, column=None):
        location = ""
        if line is not None:
            location = f" at line {line}" + (
                f", column {column}" if column is not None else "")
        super().__init__(message + location)
        self.line = line
        self.column = column


# --------------------------------------------------------------------------
# S-expression trees
# --------------------------------------------------------------------------

@dataclass
class _Token:
    text: str
    line: int
    column: int


def _tokenize(text):
    tokens = []
    line, column = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            column = 1
            i += 1
        elif ch in " \t\r":
            column += 1
            i += 1
        elif ch == "#":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif ch in "()":
            tokens.append(_Token(ch, line, column))
            column += 1
            i += 1
        else:
            start = i
            start_col = column
            while i < len(text) and text[i] not in " \t\r\n()#":
                i += 1
                column += 1
            tokens.append(_Token(text[start:i], line, start_col))
    return tokens


def _read_sexpr(tokens, pos):
    if pos >= len(tokens):
        raise ParseError("unexpected end of input")
    tok = tokens[pos]
    if tok.text == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos].text != ")":
            item, pos = _read_sexpr(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise ParseError("unclosed parenthesis", tok.line, tok.column)
        return (items, tok), pos + 1
    if tok.text == ")":
        raise ParseError("unexpected `)`", tok.line, tok.column)
    return (tok, None), pos + 1


def _atom_value(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _expect_atom(item, what):
    node, _ = item
    if not isinstance(node, _Token):
        raise ParseError(f"expected {what}, found a list")
    return node


def _build_node(item):
    body, open_tok = item
    if not isinstance(body, list):
        raise ParseError(f"expected a node form, found {body.text!r}",
                         body.line, body.column)
    if not body:
        raise ParseError("empty node form", open_tok.line, open_tok.column)
    head = _expect_atom(body[0], "a node keyword")
    kind = head.text
    rest = body[1:]

    def children_of(items):
        return [_build_node(it) for it in items]

    if kind == "root":
        return Root(children_of(rest))
    if kind == "sequence":
        return Sequence(children_of(rest))
    if kind == "fallback":
        return Fallback(children_of(rest))
    if kind == "parallel":
        if len(rest) < 2 or _expect_atom(rest[0], ":m").text != ":m":
            raise ParseError("parallel needs `:m K`", head.line, head.column)
        m_tok = _expect_atom(rest[1], "a threshold")
        try:
            m = int(m_tok.text)
        except ValueError:
            raise ParseError(f"bad parallel threshold {m_tok.text!r}",
                             m_tok.line, m_tok.column) from None
        return Parallel(m, children_of(rest[2:]))
    if kind == "repeat":
        if len(rest) < 2 or _expect_atom(rest[0], ":times").text != ":times":
            raise ParseError("repeat needs `:times K|inf`",
                             head.line, head.column)
        t_tok = _expect_atom(rest[1], "a repeat count")
        if t_tok.text == "inf":
            times = None
        else:
            try:
                times = int(t_tok.text)
            except ValueError:
                raise ParseError(f"bad repeat count {t_tok.text!r}",
                                 t_tok.line, t_tok.column) from None
        children = children_of(rest[2:])
        if len(children) != 1:
            raise ParseError("repeat takes exactly one child",
                             head.line, head.column)
        return Repeat(children[0], times=times)
    if kind == "condition":
        name = _expect_atom(_one(rest, head, "condition NAME"), "a name")
        return Condition(name.text)
    if kind == "action":
        name = _expect_atom(_one(rest, head, "action NAME"), "a name")
        return Action(name.text)
    if kind == "action-server":
        name = _expect_atom(_one(rest, head, "action-server NAME"), "a name")
        return ActionServer(name.text)
    if kind == "action-client":
        if len(rest) < 2:
            raise ParseError("action-client needs NAME @NAMESPACE",
                             head.line, head.column)
        name = _expect_atom(rest[0], "a name")
        ns_tok = _expect_atom(rest[1], "@NAMESPACE")
        if not ns_tok.text.startswith("@"):
            raise ParseError(f"expected @NAMESPACE, found {ns_tok.text!r}",
                             ns_tok.line, ns_tok.column)
        command = None
        extra = rest[2:]
        if extra:
            if len(extra) != 2 or _expect_atom(extra[0], ":key").text != ":key":
                raise ParseError("action-client options: `:key KEY`",
                                 head.line, head.column)
            command = BlackboardCommand(_expect_atom(extra[1], "a key").text)
        return ActionClient(name.text, ns_tok.text[1:], command=command)
    if kind == "set-blackboard":
        if len(rest) != 2:
            raise ParseError("set-blackboard needs KEY VALUE",
                             head.line, head.column)
        key = _expect_atom(rest[0], "a key").text
        value_item = rest[1]
        if isinstance(value_item[0], list):
            value = tuple(_atom_value(_expect_atom(it, "a number").text)
                          for it in value_item[0])
        else:
            value = _atom_value(value_item[0].text)
        return SetBlackboard(key, value)
    raise ParseError(f"unknown node kind {kind!r}", head.line, head.column)


def _one(items, head, usage):
    if len(items) != 1:
        raise ParseError(f"usage: ({usage})", head.line, head.column)
    return items[0]


def parse_tree(text):
    """Parse and validate one tree; structural invariants are checked here."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty input")
    item, pos = _read_sexpr(tokens, 0)
    if pos != len(tokens):
        tok = tokens[pos]
        raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.column)
    node = _build_node(item)
    try:
        validate_tree(node)
    except StructureError as exc:
        raise ParseError(str(exc)) from None
    return node


def _serialize_value(value):
    if isinstance(value, (tuple, list)):
        return "(" + " ".join(str(v) for v in value) + ")"
    return str(value)


def serialize_tree(node):
    """Canonical one-line form; parse(serialize(t)) is structurally t."""
    if isinstance(node, Root):
        inner = " ".join(serialize_tree(c) for c in node.children)
        return f"(root {inner})"
    if isinstance(node, Sequence) or isinstance(node, Fallback):
        inner = " ".join(serialize_tree(c) for c in node.children)
        return f"({node.kind} {inner})"
    if isinstance(node, Parallel):
        inner = " ".join(serialize_tree(c) for c in node.children)
        return f"(parallel :m {node.failure_threshold} {inner})"
    if isinstance(node, Repeat):
        times = "inf" if node.times is None else node.times
        return f"(repeat :times {times} {serialize_tree(node.child)})"
    if isinstance(node, Condition):
        return f"(condition {node.predicate_id})"
    if isinstance(node, ActionClient):
        key = ""
        if isinstance(node.command_source, BlackboardCommand):
            key = f" :key {node.command_source.key}"
        return f"(action-client {node.action} @{node.server_namespace}{key})"
    if isinstance(node, ActionServer):
        return f"(action-server {node.action})"
    if isinstance(node, Action):
        return f"(action {node.action_id})"
    if isinstance(node, SetBlackboard):
        return f"(set-blackboard {node.key} {_serialize_value(node.value)})"
    raise ValueError(f"cannot serialize node kind {node.kind!r}")


# --------------------------------------------------------------------------
# Scenario files
# --------------------------------------------------------------------------

@dataclass
class RobotSpec:
    namespace: str
    start: tuple = (0, 0)
    backup: tuple = (0, 0)
    goals: list = field(default_factory=list)
    tick_period: int = 100
    join_tick: int = 0


@dataclass
class ScenarioDoc:
    map_path: str = None
    robots: list = field(default_factory=list)
    tpu_period: int = 100
    faults: list = field(default_factory=list)
    max_ticks: int = 10000
    seed: int = 0
    mode: str = "deterministic"
    cycles: int = None

    def robot(self, namespace):
        for spec in self.robots:
            if spec.namespace == namespace:
                return spec
        raise KeyError(namespace)


def _parse_cell(text, line_no):
    parts = text.split(",")
    if len(parts) != 2:
        raise ParseError(f"expected x,y cell, found {text!r}", line_no)
    try:
        return (int(parts[0]), int(parts[1]))
    except ValueError:
        raise ParseError(f"bad cell {text!r}", line_no) from None


def _parse_int(text, line_no, what):
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"bad {what} {text!r}", line_no) from None


def parse_scenario(text, base_dir="."):
    """Parse a `.scn` document and validate it against its map."""
    doc = ScenarioDoc()
    section = None
    robot = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError("unterminated section header", line_no)
            parts = line[1:-1].split()
            section = parts[0]
            robot = None
            if section == "robot":
                if len(parts) != 2:
                    raise ParseError("robot section needs a namespace", line_no)
                namespace = parts[1]
                if any(r.namespace == namespace for r in doc.robots):
                    raise ParseError(f"duplicate robot {namespace!r}", line_no)
                robot = RobotSpec(namespace)
                doc.robots.append(robot)
            elif section not in ("run", "tpu", "faults"):
                raise ParseError(f"unknown section {section!r}", line_no)
            continue
        fields = line.split()
        key, args = fields[0], fields[1:]
        if section is None:
            if key == "map" and len(args) == 1:
                doc.map_path = os.path.join(base_dir, args[0])
            else:
                raise ParseError(f"unexpected entry {line!r}", line_no)
        elif section == "run":
            if key == "max-ticks":
                doc.max_ticks = _parse_int(args[0], line_no, "tick count")
            elif key == "seed":
                doc.seed = _parse_int(args[0], line_no, "seed")
            elif key == "mode":
                if args[0] not in ("deterministic", "udp"):
                    raise ParseError(f"unknown mode {args[0]!r}", line_no)
                doc.mode = args[0]
            elif key == "cycles":
                doc.cycles = _parse_int(args[0], line_no, "cycle count")
            else:
                raise ParseError(f"unknown run key {key!r}", line_no)
        elif section == "tpu":
            if key == "tick-period":
                doc.tpu_period = _parse_int(args[0], line_no, "period")
            else:
                raise ParseError(f"unknown tpu key {key!r}", line_no)
        elif section == "robot":
            if key == "start":
                robot.start = (_parse_int(args[0], line_no, "x"),
                               _parse_int(args[1], line_no, "y"))
            elif key == "backup":
                robot.backup = (_parse_int(args[0], line_no, "x"),
                                _parse_int(args[1], line_no, "y"))
            elif key == "goals":
                robot.goals = [_parse_cell(a, line_no) for a in args]
            elif key == "tick-period":
                robot.tick_period = _parse_int(args[0], line_no, "period")
            elif key == "join-tick":
                robot.join_tick = _parse_int(args[0], line_no, "tick")
            else:
                raise ParseError(f"unknown robot key {key!r}", line_no)
        elif section == "faults":
            if key != "at" or len(args) < 2:
                raise ParseError("fault lines read `at TICK KIND ARGS...`",
                                 line_no)
            tick = _parse_int(args[0], line_no, "tick")
            doc.faults.append(FaultSpec(tick, args[1], tuple(args[2:])))
    _validate_scenario(doc)
    return doc


def _validate_scenario(doc):
    if doc.map_path is None:
        raise ParseError("scenario is missing a `map` entry")
    if doc.max_ticks <= 0:
        raise ParseError("max-ticks must be positive")
    if not doc.robots:
        raise ParseError("scenario defines no robots")
    try:
        grid = load_map_file(doc.map_path)
    except (OSError, GridError) as exc:
        raise ParseError(f"cannot load map {doc.map_path!r}: {exc}") from None
    for robot in doc.robots:
        for label, cell in (("start", robot.start), ("backup", robot.backup)):
            if not grid.in_bounds(cell):
                raise ParseError(
                    f"{robot.namespace} {label} {cell} is off the map")
        if not robot.goals:
            raise ParseError(f"{robot.namespace} has no goals")
        for goal in robot.goals:
            if not grid.in_bounds(goal):
                raise ParseError(f"{robot.namespace} goal {goal} is off the map")


def parse_scenario_file(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario(text, base_dir=os.path.dirname(os.path.abspath(path)))
