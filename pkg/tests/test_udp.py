"""Loopback smoke tests for the UDP multicast transport."""
import time

import pytest

from mbbt.udp import UdpParticipant

PORT = 17447  # off the default port so tests never collide with a live run


def make_participant(namespace):
    try:
        return UdpParticipant(namespace, port=PORT,
                              announce_interval=0.05, liveliness_window=1.0)
    except OSError as exc:
        pytest.skip(f"multicast unavailable: {exc}")


def wait_for(predicate, timeout=3.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.02)
    return False


def test_discovery_and_publish_replication():
    a = make_participant("alpha")
    b = make_participant("beta")
    try:
        assert wait_for(lambda: {p.namespace for p in a.discover()} >=
                        {"alpha", "beta"})
        a.publish("/alpha/state", {"x": 1})
        a.publish("/alpha/state", {"x": 2})
        assert wait_for(lambda: b.read("/alpha/state") is not None
                        and b.read("/alpha/state").value == {"x": 2})
        topic = b.read("/alpha/state")
        assert topic.version == 2
    finally:
        a.close()
        b.close()


def test_bye_removes_peer():
    a = make_participant("gone")
    b = make_participant("stays")
    try:
        assert wait_for(lambda: any(p.namespace == "gone"
                                    for p in b.discover()))
        a.close()
        assert wait_for(lambda: all(p.namespace != "gone"
                                    for p in b.discover()))
    finally:
        b.close()


def test_stale_version_does_not_regress():
    a = make_participant("writer")
    b = make_participant("reader")
    try:
        a.publish("/writer/v", 1)
        a.publish("/writer/v", 2)
        assert wait_for(lambda: b.read("/writer/v") is not None
                        and b.read("/writer/v").version == 2)
        # A replayed older datagram must not win over a newer version.
        from mbbt.wire import Datagram, KIND_PUBLISH, encode, encode_value
        b._sock.sendto(  # simulate a late duplicate from the writer
            encode(Datagram(KIND_PUBLISH, "writer", "/writer/v", 1,
                            encode_value(1))),
            (a.group, a.port))
        time.sleep(0.2)
        assert b.read("/writer/v").value == 2
    finally:
        a.close()
        b.close()
