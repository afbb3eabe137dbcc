"""Concrete trees for the coordination experiment: the robot-side
navigation server, the robot-local recovery tree, and the goal-cycling
task client trees coalesced into one planning-unit tree.
"""
from __future__ import annotations

from .actions import ActionClient, ActionServer, BlackboardCommand, Executor
from .core import (Fallback, Node, Repeat, Root, Sequence, SetBlackboard,
                   Status)
from .transform import TransformError, coalesce_clients
from .world import (ARRIVED, BLOCKED, ReturnToBackup, Spin, Wait,
                    battery_fair, follow_path_step, plan_global)

NAVIGATE_ACTION = "navigate"


def goal_command(position):
    return {"pos": [int(position[0]), int(position[1])], "theta": 0}


def target_key(namespace):
    return f"{namespace}.target"


# --------------------------------------------------------------------------
# Navigation: the server-side command executor is itself a small tree of
# leaves over shared navigation state. Failed planning clears the global
# costmap and replans; a blocked step clears the local costmap and
# refollows -- unless the goal was updated in the meantime, in which case
# nothing is cleared and the fresh goal is planned instead.
# --------------------------------------------------------------------------

class _NavLeaf(Node):
    def __init__(self, nav, name):
        super().__init__((), name)
        self.nav = nav


class _ReadGoal(_NavLeaf):
    kind = "action"

    def tick(self, ctx):
        command = self.nav.command
        if command is None or "pos" not in command:
            return Status.FAILURE
        # Snapshot the goal of the previous attempt before this tick's
        # planning overwrites it; goal-updated checks compare against it.
        self.nav.last_attempt_goal = self.nav.attempted_goal
        self.nav.goal = tuple(command["pos"])
        return Status.SUCCESS


class _EnsurePath(_NavLeaf):
    kind = "action"

    def tick(self, ctx):
        nav = self.nav
        if nav.path_goal == nav.goal and nav.robot.path is not None:
            return Status.SUCCESS
        nav.attempted_goal = nav.goal
        path = plan_global(nav.grid, nav.robot.cell, nav.goal)
        if path is None:
            nav.robot.path = None
            nav.path_goal = None
            return Status.FAILURE
        nav.robot.path = path
        nav.path_goal = nav.goal
        return Status.SUCCESS


class _GoalUpdated(_NavLeaf):
    kind = "condition"

    def tick(self, ctx):
        updated = (self.nav.last_attempt_goal is not None
                   and self.nav.goal != self.nav.last_attempt_goal)
        return Status.SUCCESS if updated else Status.FAILURE


class _ClearCostmap(_NavLeaf):
    kind = "action"

    def __init__(self, nav, layer):
        super().__init__(nav, f"clear-{layer}")
        self.layer = layer

    def tick(self, ctx):
        self.nav.grid.clear_costmap(self.layer, namespace=self.nav.robot.namespace)
        return Status.SUCCESS


class _FollowStep(_NavLeaf):
    kind = "action"

    def tick(self, ctx):
        nav = self.nav
        if nav.robot.path is None:
            return Status.FAILURE
        result = follow_path_step(nav.robot, nav.grid, goal=nav.goal,
                                  tolerance=nav.tolerance)
        if result == BLOCKED:
            nav.robot.path = None
            nav.path_goal = None
            return Status.FAILURE
        if result == ARRIVED:
            if not nav.arrival_logged:
                nav.arrival_logged = True
                ctx.emit("arrival", goal=list(nav.goal))
            return Status.SUCCESS
        return Status.RUNNING


class NavigationExecutor(Executor):
    """Drives one robot to the commanded goal cell, one follow step per
    tick. Low battery is an internal fault and fails the attempt, which is
    what arms the robot-side recovery fallback."""

    def __init__(self, robot, grid, tolerance=0):
        self.robot = robot
        self.grid = grid
        self.tolerance = tolerance
        self.command = None
        self.goal = None
        self.attempted_goal = None
        self.last_attempt_goal = None
        self.path_goal = None
        self.arrival_logged = False
        self.tree = Sequence([
            _ReadGoal(self, "read-goal"),
            Fallback([
                _EnsurePath(self, "plan"),
                Sequence([
                    Fallback([_GoalUpdated(self, "goal-updated"),
                              _ClearCostmap(self, "global")]),
                    _EnsurePath(self, "replan"),
                ]),
            ]),
            Fallback([
                _FollowStep(self, "follow"),
                Sequence([
                    Fallback([_GoalUpdated(self, "goal-updated"),
                              _ClearCostmap(self, "local")]),
                    _EnsurePath(self, "replan-local"),
                    _FollowStep(self, "refollow"),
                ]),
            ]),
        ])

    def begin(self, command):
        self.command = command
        self.goal = None
        self.attempted_goal = None
        self.last_attempt_goal = None
        self.path_goal = None
        self.robot.path = None
        self.arrival_logged = False
        self.tree.reset()

    def update_command(self, command):
        self.command = command

    def tick(self, ctx):
        if not battery_fair(self.robot):
            return Status.FAILURE
        return self.tree.tick(ctx)

    def state(self):
        x, y, theta = self.robot.pose
        return {"pos": [x, y], "theta": round(theta, 6),
                "battery": round(self.robot.battery, 4)}


def build_navigation_bt(namespace, robot, grid, tolerance=0):
    """Robot-side server leaf whose executor is the navigation tree."""
    executor = NavigationExecutor(robot, grid, tolerance)
    return ActionServer(NAVIGATE_ACTION, executor=executor,
                        name=f"{namespace}-navigation")


# --------------------------------------------------------------------------
# Recovery: battery branch first, then clear-everything / spin / wait.
# --------------------------------------------------------------------------

class _RecoveryStep(Node):
    """Leaf wrapping a stateful recovery primitive; announces its step name
    once per recovery entry."""

    kind = "action"

    def __init__(self, step, primitive, robot, grid):
        super().__init__((), step)
        self.step = step
        self.primitive = primitive
        self.robot = robot
        self.grid = grid
        self._announced = False
        self._done = None

    def reset(self):
        self.primitive.reset()
        self._announced = False
        self._done = None

    def tick(self, ctx):
        if self._done is not None:
            return self._done
        if not self._announced:
            self._announced = True
            ctx.emit("recovery-step", step=self.step)
        status = self.primitive.tick(self.robot, self.grid)
        if status != Status.RUNNING:
            self._done = status
        return status


class _BatteryCheck(Node):
    """Succeeds when the battery is low (the branch guard of Fig-style
    recovery); announces the check once per entry."""

    kind = "condition"

    def __init__(self, robot):
        super().__init__((), "battery-low")
        self.robot = robot
        self._announced = False

    def reset(self):
        self._announced = False

    def tick(self, ctx):
        if not self._announced:
            self._announced = True
            ctx.emit("recovery-step", step="battery-check")
        return Status.FAILURE if battery_fair(self.robot) else Status.SUCCESS


class _ClearAll(Node):
    kind = "action"

    def __init__(self, robot, grid):
        super().__init__((), "clear-all")
        self.robot = robot
        self.grid = grid
        self._announced = False

    def reset(self):
        self._announced = False

    def tick(self, ctx):
        if not self._announced:
            self._announced = True
            ctx.emit("recovery-step", step="clear-all")
        self.grid.clear_costmap("all", namespace=self.robot.namespace)
        return Status.SUCCESS


class RecoveryTree(Node):
    """Wrapper around the recovery fallback; a tick after a scheduling gap
    means a fresh recovery entry, so the subtree is reset and the entry
    logged."""

    kind = "recovery"
    is_decorator = True

    def __init__(self, subtree, name="recovery"):
        super().__init__([subtree], name)
        self._last_tick = None

    def reset(self):
        self._last_tick = None
        super().reset()

    def tick(self, ctx):
        index = ctx.tick_index
        if self._last_tick is None or index - self._last_tick > 1:
            for child in self.children:
                child.reset()
            ctx.emit("recovery-enter")
        self._last_tick = index
        return self.children[0].tick(ctx)


def build_recovery_bt(namespace, robot, grid, spin_ticks=None, wait_ticks=None):
    spin = Spin() if spin_ticks is None else Spin(spin_ticks)
    wait = Wait() if wait_ticks is None else Wait(wait_ticks)
    subtree = Fallback([
        Sequence([
            _BatteryCheck(robot),
            _RecoveryStep("return-to-backup", ReturnToBackup(), robot, grid),
        ]),
        Sequence([
            _ClearAll(robot, grid),
            _RecoveryStep("spin", spin, robot, grid),
            _RecoveryStep("wait", wait, robot, grid),
        ]),
    ])
    return RecoveryTree(subtree, name=f"{namespace}-recovery")


# --------------------------------------------------------------------------
# Task planning: cycle each robot through its goal list forever.
# --------------------------------------------------------------------------

def build_task_bt(goals, namespace):
    """Client tree: Repeat(inf) over [set goal_k; command navigate]*."""
    if not goals:
        raise TransformError("goal list must be nonempty")
    key = target_key(namespace)
    children = []
    for k, goal in enumerate(goals, start=1):
        children.append(SetBlackboard(key, goal_command(goal),
                                      name=f"{namespace}-goal{k}"))
        children.append(ActionClient(NAVIGATE_ACTION, namespace,
                                     command=BlackboardCommand(key),
                                     name=f"{namespace}-navigate{k}"))
    return Root([Repeat(Sequence(children), times=None,
                        name=f"{namespace}-cycle")])


def build_tpu(goal_sets, namespaces):
    """Single coalesced planning-unit tree over all robots' task trees; the
    children share one blackboard."""
    if len(goal_sets) != len(namespaces):
        raise TransformError("one goal list per robot required")
    if len(set(namespaces)) != len(namespaces):
        raise TransformError("duplicate robot namespace")
    clients = [build_task_bt(goals, ns)
               for goals, ns in zip(goal_sets, namespaces)]
    return coalesce_clients(clients)


def battery_predicates(robot):
    """Predicate registry entries for condition leaves over one robot."""
    return {
        "battery-fair": lambda ctx: battery_fair(robot),
        "battery-low": lambda ctx: not battery_fair(robot),
    }
