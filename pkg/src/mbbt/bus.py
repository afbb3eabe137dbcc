"""In-process global data space: named topics, single-writer publish,
non-blocking reads, participant discovery with liveliness.

Deterministic runs share one store; the UDP transport in `udp.py`
replicates the same operations per participant.
"""
from __future__ import annotations

import re
import threading
from dataclasses import dataclass

DEFAULT_ANNOUNCE_PERIOD = 500
DEFAULT_LIVELINESS_WINDOW = 10 * DEFAULT_ANNOUNCE_PERIOD

_SEGMENT_RE = re.compile(r"^[^/\s]+$")
_TOPIC_RE = re.compile(r"^(/[^/\s]+)+$")

# Request topics are deliberately open to every participant: a rejected
# command must still reach the server to be rejected there.
_MULTI_WRITER_SUFFIX = "/req"


class BusError(Exception):
    pass


class RoleViolationError(BusError):
    """Publish attempted by a participant that does not hold the writer role."""


@dataclass
class Topic:
    name: str
    value: object
    version: int
    writer: str


@dataclass
class ParticipantRecord:
    id: str
    namespace: str
    last_announce: int
    departed: bool = False


def resolve_topic(namespace, local_name):
    """Join a namespace and a local topic name into `/namespace/local`."""
    for part in (namespace, local_name):
        if not part:
            raise BusError("empty topic segment")
    for segment in [namespace] + local_name.split("/"):
        if not _SEGMENT_RE.match(segment):
            raise BusError(f"bad topic segment {segment!r}")
    return f"/{namespace}/{local_name}"


class GlobalDataSpace:
    """Topic store plus participant registry. Writes are atomic replacements;
    reads never wait on a writer."""

    def __init__(self, trace=None, announce_period=DEFAULT_ANNOUNCE_PERIOD,
                 liveliness_window=DEFAULT_LIVELINESS_WINDOW):
        self._topics = {}
        self._participants = {}
        self._writers = {}
        self._lock = threading.Lock()
        self._generation = 0
        self.trace = trace
        self.announce_period = announce_period
        self.liveliness_window = liveliness_window
        # Committed publishes by a non-writer; enforcement keeps this empty,
        # rejected attempts land in `rejected_publishes` instead.
        self.violations = []
        self.rejected_publishes = []

    # -- participants ------------------------------------------------------

    def _is_live(self, record, now):
        return (not record.departed
                and now - record.last_announce <= self.liveliness_window)

    def live_participants(self, now):
        return [p for p in self._participants.values() if self._is_live(p, now)]

    def join(self, namespace, now=0):
        if not _SEGMENT_RE.match(namespace or ""):
            raise BusError(f"bad namespace {namespace!r}")
        with self._lock:
            for record in self._participants.values():
                if record.namespace == namespace and self._is_live(record, now):
                    raise BusError(f"namespace {namespace!r} already joined")
            self._generation += 1
            pid = f"{namespace}#{self._generation}"
            self._participants[pid] = ParticipantRecord(pid, namespace, now)
        return Participant(self, pid, namespace)

    def leave(self, pid, now=0):
        record = self._participants.get(pid)
        if record is None:
            raise BusError(f"unknown participant {pid!r}")
        record.departed = True
        with self._lock:
            for topic, writer in list(self._writers.items()):
                if writer == pid:
                    del self._writers[topic]

    def announce(self, pid, now):
        record = self._participants.get(pid)
        if record is None or record.departed:
            raise BusError(f"participant {pid!r} not joined")
        record.last_announce = now

    def discover(self, pid, now):
        record = self._participants.get(pid)
        if record is None or not self._is_live(record, now):
            raise BusError(f"caller {pid!r} is not live")
        return sorted(self.live_participants(now), key=lambda p: p.id)

    # -- topics ------------------------------------------------------------

    def publish(self, pid, topic_name, value, now=0):
        if not _TOPIC_RE.match(topic_name):
            raise BusError(f"bad topic name {topic_name!r}")
        record = self._participants.get(pid)
        if record is None or not self._is_live(record, now):
            raise BusError(f"publisher {pid!r} is not live")
        with self._lock:
            if not topic_name.endswith(_MULTI_WRITER_SUFFIX):
                holder = self._writers.get(topic_name)
                if holder is None or self._holder_gone(holder, now):
                    self._writers[topic_name] = pid
                elif holder != pid:
                    self.rejected_publishes.append((pid, topic_name))
                    raise RoleViolationError(
                        f"{pid} is not the writer of {topic_name}")
            prior = self._topics.get(topic_name)
            version = prior.version + 1 if prior else 1
            self._topics[topic_name] = Topic(topic_name, value, version, pid)
        if self.trace is not None:
            kind = "publish"
            if topic_name.endswith("/req"):
                kind = "request"
            elif topic_name.endswith("/resp"):
                kind = "response"
            self.trace.emit(kind, namespace=record.namespace, topic=topic_name,
                            value=value, version=version)
        return version

    def _holder_gone(self, holder_pid, now):
        record = self._participants.get(holder_pid)
        return record is None or not self._is_live(record, now)

    def read(self, topic_name):
        """Last committed (Topic) or None if never written. Never blocks."""
        return self._topics.get(topic_name)

    def topics(self):
        return dict(self._topics)


class Participant:
    """Handle bound to one joined namespace."""

    def __init__(self, domain, pid, namespace):
        self.domain = domain
        self.id = pid
        self.namespace = namespace

    def publish(self, topic, value, now=0):
        return self.domain.publish(self.id, topic, value, now)

    def read(self, topic):
        return self.domain.read(topic)

    def discover(self, now):
        return self.domain.discover(self.id, now)

    def announce(self, now):
        self.domain.announce(self.id, now)

    def leave(self, now=0):
        self.domain.leave(self.id, now)

    def resolve(self, local_name):
        return resolve_topic(self.namespace, local_name)
