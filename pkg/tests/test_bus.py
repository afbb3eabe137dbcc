"""Data-space semantics: naming, discovery, liveliness, single-writer
enforcement and torn-read safety under concurrency."""
import threading

import pytest

from mbbt.bus import (BusError, GlobalDataSpace, RoleViolationError,
                      resolve_topic)


def test_resolve_topic():
    assert resolve_topic("robot1", "navigate/cmd") == "/robot1/navigate/cmd"
    for namespace, local in [("", "x"), ("a b", "x"), ("a", ""), ("a", "b c")]:
        with pytest.raises(BusError):
            resolve_topic(namespace, local)


def test_join_rejects_duplicate_live_namespace():
    domain = GlobalDataSpace()
    domain.join("robot1")
    with pytest.raises(BusError):
        domain.join("robot1")


def test_rejoin_after_leave():
    domain = GlobalDataSpace()
    first = domain.join("robot1")
    first.leave()
    second = domain.join("robot1")
    assert second.id != first.id


def test_discover_lists_live_participants_sorted():
    domain = GlobalDataSpace()
    b = domain.join("beta")
    a = domain.join("alpha")
    assert [p.namespace for p in a.discover(0)] == ["alpha", "beta"]
    assert [p.namespace for p in b.discover(0)] == ["alpha", "beta"]


def test_liveliness_window_expires_silent_participants():
    domain = GlobalDataSpace(announce_period=5, liveliness_window=10)
    quiet = domain.join("quiet", now=0)
    chatty = domain.join("chatty", now=0)
    chatty.announce(9)
    chatty.announce(18)
    seen = [p.namespace for p in chatty.discover(18)]
    assert seen == ["chatty"]
    # The expired namespace may be claimed again.
    domain.join("quiet", now=18)
    with pytest.raises(BusError):
        quiet.discover(18)  # the stale handle itself is no longer live


def test_publish_read_roundtrip_and_versioning():
    domain = GlobalDataSpace()
    p = domain.join("robot1")
    assert domain.read("/robot1/state") is None
    v1 = p.publish("/robot1/state", {"x": 1})
    v2 = p.publish("/robot1/state", {"x": 2})
    assert (v1, v2) == (1, 2)
    topic = p.read("/robot1/state")
    assert topic.value == {"x": 2} and topic.version == 2
    assert topic.writer == p.id


def test_bad_topic_name_rejected():
    domain = GlobalDataSpace()
    p = domain.join("robot1")
    for name in ("robot1/state", "/robot1//state", "/robot1/a b", ""):
        with pytest.raises(BusError):
            p.publish(name, 1)


def test_single_writer_enforced():
    domain = GlobalDataSpace()
    owner = domain.join("owner")
    intruder = domain.join("intruder")
    owner.publish("/owner/navigate/cmd", {"goal": 1})
    with pytest.raises(RoleViolationError):
        intruder.publish("/owner/navigate/cmd", {"goal": 2})
    # The rejected write never landed and is logged as an attempt only.
    assert domain.read("/owner/navigate/cmd").value == {"goal": 1}
    assert domain.violations == []
    assert domain.rejected_publishes == [(intruder.id, "/owner/navigate/cmd")]


def test_request_topics_are_multi_writer():
    domain = GlobalDataSpace()
    a = domain.join("a")
    b = domain.join("b")
    a.publish("/srv/navigate/req", {"req": "a:1"})
    b.publish("/srv/navigate/req", {"req": "b:1"})
    assert domain.read("/srv/navigate/req").value == {"req": "b:1"}


def test_writer_role_released_on_leave():
    domain = GlobalDataSpace()
    owner = domain.join("owner")
    owner.publish("/owner/navigate/cmd", 1)
    owner.leave()
    successor = domain.join("successor")
    successor.publish("/owner/navigate/cmd", 2)  # no error: role reassigned
    assert domain.read("/owner/navigate/cmd").value == 2


def test_no_torn_reads_under_concurrent_writes():
    """Writes are atomic replacements: readers must never observe a value
    mixing two publishes, and versions must be monotonic."""
    domain = GlobalDataSpace()
    writer = domain.join("writer")
    topic = "/writer/blob"
    stop = threading.Event()
    problems = []

    def write_loop():
        n = 0
        while not stop.is_set():
            n += 1
            writer.publish(topic, {"a": n, "b": n, "sum": 2 * n})

    def read_loop():
        last_version = 0
        while not stop.is_set():
            t = domain.read(topic)
            if t is None:
                continue
            if t.value["a"] != t.value["b"] or t.value["sum"] != 2 * t.value["a"]:
                problems.append(("torn", t.value))
            if t.version < last_version:
                problems.append(("version", t.version, last_version))
            last_version = t.version

    threads = [threading.Thread(target=write_loop)]
    threads += [threading.Thread(target=read_loop) for _ in range(3)]
    for t in threads:
        t.start()
    threading.Event().wait(0.2)
    stop.set()
    for t in threads:
        t.join()
    assert problems == []
