"""Client/server action protocol over the data space: acceptance,
feedback propagation, rejection, timeouts and tick-ratio independence."""
import pytest

from mbbt.actions import (ActionClient, ActionServer, ActionWiring,
                          DurationExecutor, StaticCommand, canonical_command,
                          command_hash)
from mbbt.bus import GlobalDataSpace
from mbbt.core import Context, Root, Status, TickClock, tick_tree
from mbbt.runner import run_members
from mbbt.transform import TreeMember, completion_events


def test_canonical_command_ignores_key_order():
    a = {"pos": [1, 2], "theta": 0}
    b = {"theta": 0, "pos": [1, 2]}
    assert canonical_command(a) == canonical_command(b)
    assert command_hash(a) == command_hash(b)
    assert command_hash(a) != command_hash({"pos": [2, 1], "theta": 0})


def test_wiring_topics():
    wiring = ActionWiring("robot1", "navigate")
    assert wiring.topic("cmd") == "/robot1/navigate/cmd"
    assert set(wiring.topics()) == {"cmd", "state", "result", "req", "resp"}
    with pytest.raises(ValueError):
        wiring.topic("bogus")


class Harness:
    """One client and one server ticked by hand on a shared domain."""

    def __init__(self, duration=3, outcome=Status.SUCCESS, command=None,
                 executor=None):
        self.domain = GlobalDataSpace()
        executor = executor or DurationExecutor(duration, outcome)
        self.server = ActionServer("work", executor=executor)
        self.client = ActionClient(
            "work", "srv",
            command=StaticCommand(command or {"job": 1}))
        self.server_root = Root([self.server])
        self.client_root = Root([self.client])
        self.server_ctx = Context(namespace="srv",
                                  participant=self.domain.join("srv"))
        self.client_ctx = Context(namespace="cli",
                                  participant=self.domain.join("cli"))
        self.server_clock = TickClock()
        self.client_clock = TickClock()

    def tick_client(self):
        return tick_tree(self.client_root, self.client_clock, self.client_ctx)

    def tick_server(self):
        return tick_tree(self.server_root, self.server_clock, self.server_ctx)


def test_full_exchange():
    h = Harness(duration=3)
    assert h.tick_client() == Status.RUNNING      # request published
    assert h.tick_server() == Status.RUNNING      # accepted, one step
    assert h.tick_client() == Status.RUNNING
    assert h.tick_server() == Status.RUNNING
    assert h.tick_client() == Status.RUNNING
    assert h.tick_server() == Status.SUCCESS      # third step is terminal
    assert h.tick_client() == Status.SUCCESS
    resp = h.domain.read("/srv/work/resp")
    assert resp.value["response"] == "accepted"
    result = h.domain.read("/srv/work/result")
    assert result.value["status"] == Status.SUCCESS


def test_state_feedback_propagates_to_client():
    h = Harness(duration=4)
    h.tick_client()
    h.tick_server()
    h.tick_client()
    assert h.client.last_state == {"elapsed": 1}
    h.tick_server()
    h.tick_client()
    assert h.client.last_state == {"elapsed": 2}


def test_server_failure_reaches_client():
    h = Harness(duration=2, outcome=Status.FAILURE)
    h.tick_client()
    h.tick_server()
    h.tick_client()
    h.tick_server()
    assert h.tick_client() == Status.FAILURE


def test_client_fails_without_server():
    domain = GlobalDataSpace()
    client = ActionClient("work", "srv", command=StaticCommand({"job": 1}))
    ctx = Context(namespace="cli", participant=domain.join("cli"))
    assert tick_tree(Root([client]), TickClock(), ctx) == Status.FAILURE


def test_client_times_out_on_silent_server():
    domain = GlobalDataSpace()
    domain.join("srv")  # present on the bus but never ticking
    client = ActionClient("work", "srv", command=StaticCommand({"job": 1}))
    root, clock = Root([client]), TickClock()
    ctx = Context(namespace="cli", participant=domain.join("cli"))
    statuses = [tick_tree(root, clock, ctx) for _ in range(5)]
    # Three waiting ticks, failure on the fourth, then a fresh attempt.
    assert statuses == [Status.RUNNING] * 3 + [Status.FAILURE, Status.RUNNING]


def test_success_latch_survives_retick_and_clears_on_reset():
    h = Harness(duration=1)
    h.tick_client()
    h.tick_server()
    assert h.tick_client() == Status.SUCCESS
    requests = h.domain.read("/srv/work/req").version
    # Re-ticks of the same command are answered from the latch, silently.
    assert h.tick_client() == Status.SUCCESS
    assert h.domain.read("/srv/work/req").version == requests
    # A node reset starts a fresh attempt with a fresh request id.
    h.client.reset()
    first_rid = h.domain.read("/srv/work/req").value["req"]
    assert h.tick_client() == Status.RUNNING
    assert h.domain.read("/srv/work/req").value["req"] != first_rid


def test_new_command_supersedes_latch():
    h = Harness(duration=1)
    h.tick_client()
    h.tick_server()
    assert h.tick_client() == Status.SUCCESS
    h.client.command_source = StaticCommand({"job": 2})
    assert h.tick_client() == Status.RUNNING  # new attempt for the new goal


def test_identical_rerequest_is_accepted_while_busy():
    """A second client re-sending the identical command is folded into the
    running execution instead of rejected."""
    h = Harness(duration=4, command={"job": 9})
    other = ActionClient("work", "srv", command=StaticCommand({"job": 9}))
    other_ctx = Context(namespace="cli2", participant=h.domain.join("cli2"))
    other_root, other_clock = Root([other]), TickClock()
    h.tick_client()
    h.tick_server()
    tick_tree(other_root, other_clock, other_ctx)
    assert h.tick_server() == Status.RUNNING
    resp = h.domain.read("/srv/work/resp")
    assert resp.value["response"] == "accepted"
    assert resp.value["req"] == other._request["id"]


def test_conflicting_command_rejected():
    h = Harness(duration=6, command={"job": 1})
    intruder = ActionClient("work", "srv", command=StaticCommand({"job": 2}))
    intruder_ctx = Context(namespace="cli2", participant=h.domain.join("cli2"))
    intruder_root, intruder_clock = Root([intruder]), TickClock()

    h.tick_client()
    h.tick_server()  # busy with job 1 now
    tick_tree(intruder_root, intruder_clock, intruder_ctx)
    assert h.tick_server() == Status.RUNNING  # keeps executing job 1
    resp = h.domain.read("/srv/work/resp")
    assert resp.value["response"] == "command-rejected"
    # One client tick later the intruder observes the rejection and fails.
    assert tick_tree(intruder_root, intruder_clock,
                     intruder_ctx) == Status.FAILURE
    # The rejected command never displaced the committed one.
    assert h.domain.read("/srv/work/cmd").value["value"] == {"job": 1}
    assert h.domain.violations == []


def test_terminal_replay_is_idempotent():
    h = Harness(duration=2)
    h.tick_client()
    h.tick_server()
    h.tick_client()
    h.tick_server()                       # terminal S for this request id
    assert h.tick_server() == Status.SUCCESS   # replayed, not re-executed
    assert h.server.executor.elapsed == 2


def test_done_server_accepts_a_fresh_request():
    h = Harness(duration=1)
    h.tick_client()
    h.tick_server()
    h.tick_client()                       # SUCCESS, latched
    h.client.reset()
    h.tick_client()                       # fresh request id, same command
    executor = h.server.executor
    executor.elapsed = 0
    assert h.tick_server() == Status.RUNNING or executor.duration == 1


@pytest.mark.parametrize("client_period,server_period", [
    (100, 100), (100, 300), (700, 200)])
def test_tick_ratio_independence(client_period, server_period):
    """The exchanged completion is the same whatever the period ratio."""
    client = TreeMember("cli", Root([
        ActionClient("work", "srv", command=StaticCommand({"job": 5}))]),
        period=client_period)
    server = TreeMember("srv", Root([ActionServer("work")]),
                        period=server_period)
    trace = run_members([client, server],
                        executors={"work": lambda: DurationExecutor(3)},
                        max_ticks=100)
    assert completion_events(trace.records, "srv") == [("work", Status.SUCCESS)]


def test_client_timeout_scales_with_its_own_period():
    """A slow client outlives a fast server's quiet spells: with a 7:2
    period ratio the response always lands within one client tick."""
    client = TreeMember("cli", Root([
        ActionClient("work", "srv", command=StaticCommand({"job": 5}))]),
        period=700)
    server = TreeMember("srv", Root([ActionServer("work")]), period=200)
    trace = run_members([client, server],
                        executors={"work": lambda: DurationExecutor(10)},
                        max_ticks=100)
    statuses = [r["status"] for r in trace.records
                if r.get("kind") == "tick-status" and r["namespace"] == "cli"]
    assert Status.FAILURE not in statuses
    assert statuses[-1] == Status.SUCCESS
