"""Deterministic grid world: occupancy map with costmap overlays, A* global
planning, path following, battery, recovery primitives and fault injection.

Cells are (x, y) integer pairs; row 0 of a map file is y = 0. Injected
blocks live in their own overlay so costmap clearing never undoes a fault.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .core import Status

PROGRESSED = "progressed"
ARRIVED = "arrived"
BLOCKED = "blocked"

DEFAULT_BATTERY_THRESHOLD = 20.0
DEFAULT_BATTERY_DRAIN = 0.05
DEFAULT_SPIN_TICKS = 8
DEFAULT_WAIT_TICKS = 5

# Neighbor expansion order: lower y first, then lower x (deterministic ties).
_NEIGHBOR_ORDER = ((0, -1), (-1, 0), (1, 0), (0, 1))


class GridError(Exception):
    """Bad input (out-of-bounds cell, malformed map); distinct from a
    planning failure, which is a normal outcome."""


class FaultRejected(Exception):
    pass


@dataclass
class OccupancyGrid:
    width: int
    height: int
    resolution: float = 1.0
    static_cells: set = field(default_factory=set)
    fault_cells: set = field(default_factory=set)
    global_costmap: set = field(default_factory=set)
    local_costmaps: dict = field(default_factory=dict)

    def in_bounds(self, cell):
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def check_bounds(self, cell):
        if not self.in_bounds(cell):
            raise GridError(f"cell {cell} outside {self.width}x{self.height} grid")

    def statically_blocked(self, cell):
        return cell in self.static_cells or cell in self.fault_cells

    def blocked_for_planning(self, cell):
        return self.statically_blocked(cell) or cell in self.global_costmap

    def blocked_for_following(self, cell, namespace):
        return (self.statically_blocked(cell)
                or cell in self.local_costmaps.get(namespace, ()))

    def local_costmap(self, namespace):
        return self.local_costmaps.setdefault(namespace, set())

    def clear_costmap(self, layer="all", namespace=None):
        if layer == "global":
            self.global_costmap.clear()
        elif layer == "local":
            if namespace is None:
                raise GridError("local costmap clear needs a namespace")
            self.local_costmap(namespace).clear()
        elif layer == "all":
            self.global_costmap.clear()
            if namespace is None:
                self.local_costmaps.clear()
            else:
                self.local_costmap(namespace).clear()
        else:
            raise GridError(f"unknown costmap layer {layer!r}")


def load_map(text):
    """Parse the plain-text map format: `W H resolution` then H rows of
    `.` (free) / `#` (occupied) characters, row 0 being y=0."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise GridError("empty map file")
    header = lines[0].split()
    if len(header) != 3:
        raise GridError("map header must be `W H resolution`")
    try:
        width, height = int(header[0]), int(header[1])
        resolution = float(header[2])
    except ValueError as exc:
        raise GridError(f"bad map header: {exc}") from None
    rows = lines[1:]
    if len(rows) != height:
        raise GridError(f"expected {height} map rows, found {len(rows)}")
    occupied = set()
    for y, row in enumerate(rows):
        if len(row) != width:
            raise GridError(f"map row {y} has width {len(row)}, expected {width}")
        for x, ch in enumerate(row):
            if ch == "#":
                occupied.add((x, y))
            elif ch != ".":
                raise GridError(f"bad map character {ch!r} at ({x},{y})")
    return OccupancyGrid(width, height, resolution, static_cells=occupied)


def load_map_file(path):
    with open(path, encoding="utf-8") as fh:
        return load_map(fh.read())


@dataclass
class RobotState:
    namespace: str
    pose: tuple = (0, 0, 0.0)  # x, y, heading
    battery: float = 100.0
    path: list = None
    backup_position: tuple = (0, 0)
    speed: int = 1
    battery_threshold: float = DEFAULT_BATTERY_THRESHOLD
    battery_drain: float = DEFAULT_BATTERY_DRAIN

    @property
    def cell(self):
        return (self.pose[0], self.pose[1])

    def move_to(self, cell):
        dx, dy = cell[0] - self.pose[0], cell[1] - self.pose[1]
        heading = math.atan2(dy, dx) if (dx or dy) else self.pose[2]
        self.pose = (cell[0], cell[1], heading)


@dataclass
class GoalPoint:
    position: tuple
    tolerance: int = 0


def plan_global(grid, start, goal):
    """4-connected A* over static + fault + global-costmap blockage.

    Returns the cells after `start` through `goal`, [] when start == goal,
    or None on planning failure (unreachable or blocked goal).
    """
    grid.check_bounds(start)
    grid.check_bounds(goal)
    if grid.statically_blocked(start):
        raise GridError(f"start cell {start} is occupied")
    if start == goal:
        return []
    if grid.blocked_for_planning(goal):
        return None

    def h(cell):
        return abs(cell[0] - goal[0]) + abs(cell[1] - goal[1])

    counter = 0
    open_heap = [(h(start), 0, start)]
    g_score = {start: 0}
    came_from = {}
    closed = set()
    while open_heap:
        _, _, current = heapq.heappop(open_heap)
        if current == goal:
            path = [current]
            while path[-1] != start:
                path.append(came_from[path[-1]])
            path.reverse()
            return path[1:]
        if current in closed:
            continue
        closed.add(current)
        cx, cy = current
        for dx, dy in _NEIGHBOR_ORDER:
            nxt = (cx + dx, cy + dy)
            if not grid.in_bounds(nxt) or grid.blocked_for_planning(nxt):
                continue
            tentative = g_score[current] + 1
            if tentative < g_score.get(nxt, math.inf):
                g_score[nxt] = tentative
                came_from[nxt] = current
                counter += 1
                heapq.heappush(open_heap, (tentative + h(nxt), counter, nxt))
    return None


def bfs_shortest_cost(grid, start, goal):
    """Independent breadth-first oracle; returns the step count or None."""
    grid.check_bounds(start)
    grid.check_bounds(goal)
    if start == goal:
        return 0
    if grid.blocked_for_planning(goal):
        return None
    frontier = [start]
    dist = {start: 0}
    while frontier:
        nxt_frontier = []
        for cell in frontier:
            for dx, dy in _NEIGHBOR_ORDER:
                nxt = (cell[0] + dx, cell[1] + dy)
                if (nxt in dist or not grid.in_bounds(nxt)
                        or grid.blocked_for_planning(nxt)):
                    continue
                dist[nxt] = dist[cell] + 1
                if nxt == goal:
                    return dist[nxt]
                nxt_frontier.append(nxt)
        frontier = nxt_frontier
    return None


def follow_path_step(robot, grid, goal=None, tolerance=0):
    """Advance up to `speed` cells along the robot's current path."""
    if robot.path is None:
        raise GridError(f"{robot.namespace} has no current path")
    for _ in range(robot.speed):
        if not robot.path:
            break
        nxt = robot.path[0]
        if grid.blocked_for_following(nxt, robot.namespace):
            return BLOCKED
        robot.path.pop(0)
        robot.move_to(nxt)
    if not robot.path:
        return ARRIVED
    if goal is not None:
        dist = abs(robot.cell[0] - goal[0]) + abs(robot.cell[1] - goal[1])
        if dist <= tolerance:
            return ARRIVED
    return PROGRESSED


def battery_step(robot, drain=None):
    d = robot.battery_drain if drain is None else drain
    robot.battery = max(0.0, robot.battery - d)
    return robot.battery


def battery_fair(robot, threshold=None):
    t = robot.battery_threshold if threshold is None else threshold
    return robot.battery >= t


class RecoveryPrimitive:
    """Base for stateful multi-tick recovery motions."""

    def reset(self):
        pass

    def tick(self, robot, grid):
        raise NotImplementedError


class Spin(RecoveryPrimitive):
    """Rotate a full turn over `duration` ticks, heading restored mod 2*pi."""

    def __init__(self, duration=DEFAULT_SPIN_TICKS):
        self.duration = duration
        self._ticks = 0

    def reset(self):
        self._ticks = 0

    def tick(self, robot, grid):
        if self._ticks >= self.duration:
            return Status.SUCCESS
        self._ticks += 1
        x, y, theta = robot.pose
        robot.pose = (x, y, (theta + 2 * math.pi / self.duration) % (2 * math.pi))
        return Status.SUCCESS if self._ticks >= self.duration else Status.RUNNING


class Wait(RecoveryPrimitive):
    def __init__(self, duration=DEFAULT_WAIT_TICKS):
        self.duration = duration
        self._ticks = 0

    def reset(self):
        self._ticks = 0

    def tick(self, robot, grid):
        if self._ticks >= self.duration:
            return Status.SUCCESS
        self._ticks += 1
        return Status.SUCCESS if self._ticks >= self.duration else Status.RUNNING


class ReturnToBackup(RecoveryPrimitive):
    """Plan and follow a path back to the backup position; the battery
    recharges to full on arrival."""

    def __init__(self):
        self._path = None

    def reset(self):
        self._path = None

    def tick(self, robot, grid):
        target = robot.backup_position
        if robot.cell == target:
            robot.battery = 100.0
            return Status.SUCCESS
        if self._path is None:
            self._path = plan_global(grid, robot.cell, target)
            if self._path is None:
                return Status.FAILURE
        for _ in range(robot.speed):
            if not self._path:
                break
            nxt = self._path[0]
            if grid.statically_blocked(nxt):
                self._path = None
                return Status.FAILURE
            self._path.pop(0)
            robot.move_to(nxt)
        if robot.cell == target:
            robot.battery = 100.0
            self._path = None
            return Status.SUCCESS
        return Status.RUNNING


def recovery_primitive(kind, **kwargs):
    if kind == "spin":
        return Spin(kwargs.get("duration", DEFAULT_SPIN_TICKS))
    if kind == "wait":
        return Wait(kwargs.get("duration", DEFAULT_WAIT_TICKS))
    if kind == "return_to_backup":
        return ReturnToBackup()
    raise ValueError(f"unknown recovery primitive {kind!r}")


@dataclass
class FaultSpec:
    tick: int
    kind: str  # block-cell | unblock-cell | drain-battery
    args: tuple

    def describe(self):
        return {"fault": self.kind, "args": list(self.args)}


def apply_fault(fault, grid, robots):
    """Mutate the world per the fault spec; robots is namespace -> RobotState."""
    if fault.kind == "block-cell":
        cell = (int(fault.args[0]), int(fault.args[1]))
        grid.check_bounds(cell)
        for robot in robots.values():
            if robot.cell == cell:
                raise FaultRejected(f"cell {cell} is under {robot.namespace}")
        grid.fault_cells.add(cell)
    elif fault.kind == "unblock-cell":
        cell = (int(fault.args[0]), int(fault.args[1]))
        grid.fault_cells.discard(cell)
    elif fault.kind == "drain-battery":
        namespace, level = fault.args[0], float(fault.args[1])
        if namespace not in robots:
            raise FaultRejected(f"unknown robot {namespace!r}")
        robots[namespace].battery = level
    else:
        raise FaultRejected(f"unknown fault kind {fault.kind!r}")
