"""Node semantics of the tree engine, checked against brute-force rules."""
import pytest
from hypothesis import given, strategies as st

from mbbt.core import (Action, Blackboard, BlackboardError, Condition, Context,
                       Fallback, Parallel, Repeat, Root, Sequence,
                       SetBlackboard, Status, StructureError, TickClock,
                       fallback_status, parallel_status, sequence_status,
                       tick_tree, validate_tree)


class Stub:
    """Leaf returning a scripted run of statuses, counting its ticks."""

    kind = "action"
    children = ()

    def __init__(self, *statuses, name="stub"):
        self.statuses = list(statuses)
        self.name = name
        self.ticks = 0
        self.resets = 0

    def tick(self, ctx):
        status = self.statuses[min(self.ticks, len(self.statuses) - 1)]
        self.ticks += 1
        return status

    def reset(self):
        self.resets += 1
        self.ticks = 0


def run_once(node, ctx=None):
    root = Root([node])
    clock = TickClock()
    return tick_tree(root, clock, ctx or Context())


status_lists = st.lists(st.sampled_from(Status.ALL), min_size=1, max_size=6)


@given(status_lists)
def test_sequence_matches_oracle(statuses):
    node = Sequence([Stub(s) for s in statuses])
    # Oracle: first non-success child decides; all-success is success.
    expected = next((s for s in statuses if s != Status.SUCCESS),
                    Status.SUCCESS)
    assert run_once(node) == expected == sequence_status(statuses)


@given(status_lists)
def test_fallback_matches_oracle(statuses):
    node = Fallback([Stub(s) for s in statuses])
    expected = next((s for s in statuses if s != Status.FAILURE),
                    Status.FAILURE)
    assert run_once(node) == expected == fallback_status(statuses)


@given(status_lists)
def test_sequence_fallback_duality(statuses):
    """Swapping S and F in the inputs swaps the two aggregation rules."""
    dual = {Status.SUCCESS: Status.FAILURE, Status.FAILURE: Status.SUCCESS,
            Status.RUNNING: Status.RUNNING}
    flipped = [dual[s] for s in statuses]
    assert sequence_status(statuses) == dual[fallback_status(flipped)]


@given(status_lists.filter(lambda s: len(s) >= 2),
       st.integers(min_value=0, max_value=5))
def test_parallel_matches_enumeration(statuses, m):
    m = min(m, len(statuses) - 1)
    node = Parallel(m, [Stub(s) for s in statuses])
    # Brute-force rule, written independently of the implementation.
    fails = statuses.count(Status.FAILURE)
    if fails > m:
        expected = Status.FAILURE
    elif any(s == Status.RUNNING for s in statuses):
        expected = Status.RUNNING
    else:
        expected = Status.SUCCESS
    assert run_once(node) == expected == parallel_status(statuses, m)


def test_parallel_ticks_every_child():
    children = [Stub(Status.FAILURE), Stub(Status.RUNNING), Stub(Status.SUCCESS)]
    run_once(Parallel(2, children))
    assert [c.ticks for c in children] == [1, 1, 1]


def test_sequence_short_circuits():
    first, second = Stub(Status.FAILURE), Stub(Status.SUCCESS)
    run_once(Sequence([first, second]))
    assert (first.ticks, second.ticks) == (1, 0)


def test_fallback_short_circuits():
    first, second = Stub(Status.SUCCESS), Stub(Status.FAILURE)
    run_once(Fallback([first, second]))
    assert (first.ticks, second.ticks) == (1, 0)


def test_sequence_is_memoryless():
    """A Running child makes the next tick restart from the first child."""
    first = Stub(Status.SUCCESS)
    second = Stub(Status.RUNNING, Status.RUNNING, Status.SUCCESS)
    root = Root([Sequence([first, second])])
    clock = TickClock()
    ctx = Context()
    statuses = [tick_tree(root, clock, ctx) for _ in range(3)]
    assert statuses == [Status.RUNNING, Status.RUNNING, Status.SUCCESS]
    assert first.ticks == 3


def test_repeat_finite():
    child = Stub(Status.SUCCESS)
    node = Repeat(child, times=3)
    statuses = [run_once_keep(node) for _ in range(3)]
    assert statuses == [Status.RUNNING, Status.RUNNING, Status.SUCCESS]
    assert child.resets == 3  # reset after each completed iteration


def run_once_keep(node, _cache={}):
    key = id(node)
    if key not in _cache:
        _cache[key] = (Root([node]), TickClock(), Context())
    root, clock, ctx = _cache[key]
    return tick_tree(root, clock, ctx)


def test_repeat_failure_propagates_and_resets_count():
    child = Stub(Status.SUCCESS, Status.FAILURE, name="flaky")
    child.reset = lambda: None  # keep the script position across iterations
    node = Repeat(child, times=2)
    assert run_once_keep(node) == Status.RUNNING
    assert run_once_keep(node) == Status.FAILURE
    assert node._completed == 0


def test_repeat_infinite_never_succeeds():
    child = Stub(Status.SUCCESS)
    node = Repeat(child, times=None)
    for _ in range(20):
        assert run_once_keep(node) == Status.RUNNING


def test_repeat_zero_times_is_success():
    child = Stub(Status.FAILURE)
    assert run_once(Repeat(child, times=0)) == Status.SUCCESS
    assert child.ticks == 0


def test_condition_never_running():
    ctx = Context(predicates={"always": lambda c: True,
                              "never": lambda c: False})
    assert run_once(Condition("always"), ctx) == Status.SUCCESS
    assert run_once(Condition("never"), ctx) == Status.FAILURE


def test_condition_unregistered_predicate():
    with pytest.raises(StructureError):
        run_once(Condition("missing"))


def test_blackboard_unset_read_is_error():
    bb = Blackboard()
    with pytest.raises(BlackboardError):
        bb.get("absent")
    bb.set("k", 1)
    assert bb.get("k") == 1
    assert bb.contains("k") and not bb.contains("absent")


def test_set_blackboard_leaf():
    ctx = Context()
    assert run_once(SetBlackboard("goal", (3, 4)), ctx) == Status.SUCCESS
    assert ctx.blackboard.get("goal") == (3, 4)


def test_action_runs_registered_executor():
    class CountDown:
        def __init__(self, n):
            self.n = n

        def begin(self, command):
            pass

        def tick(self, ctx):
            self.n -= 1
            return Status.SUCCESS if self.n <= 0 else Status.RUNNING

    ctx = Context(executors={"work": CountDown(2)})
    node = Action("work")
    root = Root([node])
    clock = TickClock()
    assert tick_tree(root, clock, ctx) == Status.RUNNING
    assert tick_tree(root, clock, ctx) == Status.SUCCESS


def test_clock_advances_per_tick():
    clock = TickClock(period=40)
    root = Root([Stub(Status.SUCCESS)])
    ctx = Context()
    tick_tree(root, clock, ctx)
    tick_tree(root, clock, ctx)
    assert (clock.time, clock.index) == (80, 2)
    assert ctx.now == 80 and ctx.tick_index == 2


@pytest.mark.parametrize("bad", [
    Sequence([]),                         # control node with no children
    Parallel(0, [Stub(Status.SUCCESS)]),  # parallel needs >= 2 children
    Parallel(2, [Stub(Status.SUCCESS), Stub(Status.SUCCESS)]),  # M >= N
    Root([Stub(Status.SUCCESS)]),         # nested root
])
def test_structure_invariants(bad):
    with pytest.raises(StructureError):
        validate_tree(Root([bad]))


def test_root_needs_one_child():
    with pytest.raises(StructureError):
        validate_tree(Root([]))
    with pytest.raises(StructureError):
        validate_tree(Sequence([Stub(Status.SUCCESS)]))


def test_structure_error_names_the_node_path():
    bad = Root([Sequence([Fallback([])], name="outer")])
    with pytest.raises(StructureError, match="outer/fallback"):
        validate_tree(bad)
