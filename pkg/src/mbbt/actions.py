"""Split-action protocol: action client and server leaves exchanging
command/state/result through per-action topics on the data space.

Topic contract for action `a` under namespace `ns`:
    /ns/a/cmd     written by the client, carries the command
    /ns/a/state   written by the server, latest fed-back state
    /ns/a/result  written by the server, latest return status
    /ns/a/req     request (request-id, command hash); open to any client
    /ns/a/resp    written by the server, accepted / command-rejected
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .bus import RoleViolationError, resolve_topic
from .core import Node, Status

TOPIC_FIELDS = ("cmd", "state", "result", "req", "resp")

# Client ticks to wait for a response before treating the request as rejected.
RESPONSE_TIMEOUT_TICKS = 3


def canonical_command(value):
    """Canonical JSON form used for command equality; coordinates are
    expected to already be quantized to grid cells."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def command_hash(value):
    return hashlib.sha1(canonical_command(value).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ActionWiring:
    """The topic triple (plus request/response pair) of one split action."""

    namespace: str
    action: str

    def topic(self, field):
        if field not in TOPIC_FIELDS:
            raise ValueError(f"unknown topic field {field!r}")
        return resolve_topic(self.namespace, f"{self.action}/{field}")

    def topics(self):
        return {field: self.topic(field) for field in TOPIC_FIELDS}


class CommandSource:
    """Where a client takes its command from on each tick."""

    def resolve(self, ctx):
        raise NotImplementedError


class StaticCommand(CommandSource):
    def __init__(self, value):
        self.value = value

    def resolve(self, ctx):
        return self.value


class BlackboardCommand(CommandSource):
    def __init__(self, key):
        self.key = key

    def resolve(self, ctx):
        return ctx.blackboard.get(self.key)


class Executor:
    """Server-side command executor, stepped once per accepted server tick."""

    def begin(self, command):
        pass

    def tick(self, ctx) -> str:
        raise NotImplementedError

    def state(self):
        return None


class DurationExecutor(Executor):
    """Deterministic test executor: Running for `duration - 1` ticks, then a
    fixed terminal outcome. Progress persists like world state does, so a
    re-tick after completion stays terminal."""

    def __init__(self, duration, outcome=Status.SUCCESS):
        if duration < 0:
            raise ValueError("duration must be >= 0")
        self.duration = duration
        self.outcome = outcome
        self.elapsed = 0

    def tick(self, ctx):
        if self.elapsed < self.duration:
            self.elapsed += 1
        if self.elapsed >= self.duration:
            return self.outcome
        return Status.RUNNING

    def state(self):
        return {"elapsed": self.elapsed}


class ActionClient(Node):
    """Client half of a split action (one goal attempt per request id).

    Publishes the command and a request every tick; Running while the
    server's answer is pending, Failure on rejection or timeout, and the
    server's fed-back status once accepted. A finished Success is latched
    per command so a re-tick inside the same sequence pass does not issue
    a fresh attempt; a reset (e.g. by a Repeat iteration) clears the latch.
    """

    kind = "action-client"

    def __init__(self, action, server_namespace, command=None, name=None,
                 response_timeout=RESPONSE_TIMEOUT_TICKS):
        super().__init__((), name or f"client:{action}")
        self.action = action
        self.server_namespace = server_namespace
        self.command_source = command or StaticCommand({"action": action})
        self.response_timeout = response_timeout
        self.wiring = ActionWiring(server_namespace, action)
        self.last_state = None
        self._request = None
        self._success_latch = None
        self._counter = 0

    def reset(self):
        self._request = None
        self._success_latch = None

    def _fail(self):
        self._request = None
        return Status.FAILURE

    def tick(self, ctx):
        participant = ctx.participant
        if participant is None:
            raise RuntimeError("action client requires a bus participant")
        now = ctx.now
        if not any(p.namespace == self.server_namespace
                   for p in participant.discover(now)):
            return self._fail()

        command = self.command_source.resolve(ctx)
        chash = command_hash(command)
        if self._success_latch == chash:
            return Status.SUCCESS
        self._success_latch = None

        if self._request is None or self._request["hash"] != chash:
            self._counter += 1
            # The id must be unique across every client node that shares the
            # participant, and stable run to run: name + hash + attempt no.
            self._request = {
                "id": f"{participant.id}/{self.name}/{chash}:{self._counter}",
                "hash": chash,
                "waited": 0,
                "response": None,
                "result": None,
            }
        req = self._request
        try:
            participant.publish(self.wiring.topic("cmd"),
                                {"req": req["id"], "value": command}, now)
        except RoleViolationError:
            # Another client holds the command topic; the request still goes
            # out and the server rejects it by command hash.
            pass
        participant.publish(self.wiring.topic("req"),
                            {"req": req["id"], "hash": chash,
                             "client": participant.id}, now)

        resp = participant.read(self.wiring.topic("resp"))
        if resp is not None and resp.value.get("req") == req["id"]:
            req["response"] = resp.value.get("response")

        if req["response"] == "accepted":
            state = participant.read(self.wiring.topic("state"))
            if state is not None and state.value.get("req") == req["id"]:
                self.last_state = state.value.get("state")
            result = participant.read(self.wiring.topic("result"))
            if result is not None and result.value.get("req") == req["id"]:
                req["result"] = result.value.get("status")
            if req["result"] == Status.SUCCESS:
                self._success_latch = chash
                self._request = None
                return Status.SUCCESS
            if req["result"] == Status.FAILURE:
                return self._fail()
            return Status.RUNNING
        if req["response"] == "command-rejected":
            return self._fail()
        req["waited"] += 1
        if req["waited"] > self.response_timeout:
            return self._fail()
        return Status.RUNNING


class ActionServer(Node):
    """Server half of a split action.

    Accepts a request when idle, or when it carries the identical command
    it is already executing (idempotent re-request); anything else is
    rejected. One executor step runs per accepted tick; state and result
    are published tagged with the request id, and the published result is
    also the node's own status.
    """

    kind = "action-server"

    def __init__(self, action, executor=None, name=None):
        super().__init__((), name or f"server:{action}")
        self.action = action
        self.executor = executor
        self._current = None
        self._terminal = None
        self._rejected = None

    def reset(self):
        self._current = None
        self._terminal = None
        self._rejected = None

    def _resolve_executor(self, ctx):
        executor = self.executor or ctx.executors.get(self.action)
        if executor is None:
            raise RuntimeError(f"no executor for action {self.action!r}")
        return executor

    def _wiring(self, ctx):
        return ActionWiring(ctx.namespace, self.action)

    def tick(self, ctx):
        participant = ctx.participant
        if participant is None:
            raise RuntimeError("action server requires a bus participant")
        wiring = self._wiring(ctx)
        now = ctx.now
        request = participant.read(wiring.topic("req"))
        if request is None:
            if self._current is None:
                return Status.RUNNING
            # Keep executing the accepted command between client requests.
            return self._step(ctx, wiring, self._current["rid"], now)

        rid = request.value.get("req")
        rhash = request.value.get("hash")

        if self._terminal is not None and rid == self._terminal["rid"]:
            # Idempotent replay of an already-answered attempt.
            self._respond(participant, wiring, rid, "accepted", now)
            self._publish_result(participant, wiring, rid,
                                 self._terminal["status"], now)
            return self._terminal["status"]

        if rid == self._rejected:
            # Already turned down; don't repeat the response.
            if self._current is not None:
                return self._step(ctx, wiring, self._current["rid"], now)
            return Status.RUNNING

        cmd = participant.read(wiring.topic("cmd"))
        command = None
        if cmd is not None and command_hash(cmd.value.get("value")) == rhash:
            command = cmd.value.get("value")
        if cmd is not None and command is None:
            # The requester does not hold the command topic: its command
            # never arrived, so the request cannot be honored.
            return self._reject(ctx, participant, wiring, rid, now)

        if self._current is None:
            self._respond(participant, wiring, rid, "accepted", now)
            executor = self._resolve_executor(ctx)
            self._current = {"rid": rid, "hash": rhash, "command": command}
            executor.begin(command)
            return self._step(ctx, wiring, rid, now)

        if rhash == self._current["hash"]:
            self._respond(participant, wiring, rid, "accepted", now)
            self._current["rid"] = rid
            return self._step(ctx, wiring, rid, now)

        # Busy with a different command.
        return self._reject(ctx, participant, wiring, rid, now)

    def _reject(self, ctx, participant, wiring, rid, now):
        self._respond(participant, wiring, rid, "command-rejected", now)
        self._publish_result(participant, wiring, rid, Status.FAILURE, now)
        self._rejected = rid
        if self._current is not None:
            # Keep driving the accepted command; the stray request does not
            # preempt it.
            return self._step(ctx, wiring, self._current["rid"], now)
        # Rejecting a stray request is not a completion of this server's
        # own execution; keep waiting for an honorable command.
        return Status.RUNNING

    def _respond(self, participant, wiring, rid, response, now):
        participant.publish(wiring.topic("resp"),
                            {"req": rid, "response": response}, now)

    def _publish_result(self, participant, wiring, rid, status, now):
        participant.publish(wiring.topic("result"),
                            {"req": rid, "status": status}, now)

    def _step(self, ctx, wiring, rid, now):
        executor = self._resolve_executor(ctx)
        status = executor.tick(ctx)
        participant = ctx.participant
        participant.publish(wiring.topic("state"),
                            {"req": rid, "state": executor.state()}, now)
        if status == Status.RUNNING:
            self._publish_result(participant, wiring, rid, Status.RUNNING, now)
            return Status.RUNNING
        self._publish_result(participant, wiring, rid, status, now)
        self._terminal = {"rid": rid, "hash": self._current["hash"],
                          "status": status}
        self._current = None
        ctx.emit("completion", action=self.action, status=status)
        return status
