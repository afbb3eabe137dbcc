"""Optional UDP-multicast transport: each participant keeps a private
replica of the topic store, reconciled last-writer-wins by version.

Runs are wall-clock driven and nondeterministic; traces produced in this
mode are refused by the trace comparator.
"""
from __future__ import annotations

import socket
import struct
import threading
import time as wall

from .wire import (DEFAULT_GROUP, DEFAULT_PORT, KIND_ANNOUNCE, KIND_BYE,
                   KIND_PUBLISH, Datagram, decode, decode_value, encode,
                   encode_value)
from .bus import ParticipantRecord, Topic


class UdpParticipant:
    """One namespace on the multicast domain, with a background receiver."""

    def __init__(self, namespace, group=DEFAULT_GROUP, port=DEFAULT_PORT,
                 announce_interval=0.5, liveliness_window=5.0):
        self.namespace = namespace
        self.id = namespace
        self.group = group
        self.port = port
        self.announce_interval = announce_interval
        self.liveliness_window = liveliness_window
        self._topics = {}
        self._peers = {}
        self._lock = threading.Lock()
        self._closed = threading.Event()

        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind(("", port))
        mreq = struct.pack("4sl", socket.inet_aton(group), socket.INADDR_ANY)
        self._sock.setsockopt(socket.IPPROTO_IP, socket.IP_ADD_MEMBERSHIP, mreq)
        self._sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_LOOP, 1)
        self._sock.settimeout(0.1)

        self._receiver = threading.Thread(target=self._receive_loop, daemon=True)
        self._receiver.start()
        self._announcer = threading.Thread(target=self._announce_loop, daemon=True)
        self._announcer.start()
        self._send(Datagram(KIND_ANNOUNCE, namespace))

    # -- domain operations -------------------------------------------------

    def publish(self, topic, value, now=None):
        with self._lock:
            prior = self._topics.get(topic)
            version = prior.version + 1 if prior else 1
            self._topics[topic] = Topic(topic, value, version, self.id)
        self._send(Datagram(KIND_PUBLISH, self.namespace, topic, version,
                            encode_value(value)))
        return version

    def read(self, topic):
        with self._lock:
            return self._topics.get(topic)

    def discover(self, now=None):
        deadline = wall.monotonic() - self.liveliness_window
        with self._lock:
            live = [p for p, seen in self._peers.items() if seen >= deadline]
        records = [ParticipantRecord(self.id, self.namespace, 0)]
        records += [ParticipantRecord(p, p, 0) for p in live
                    if p != self.namespace]
        return sorted(records, key=lambda r: r.id)

    def announce(self, now=None):
        self._send(Datagram(KIND_ANNOUNCE, self.namespace))

    def leave(self, now=None):
        self.close()

    def close(self):
        if self._closed.is_set():
            return
        self._closed.set()
        try:
            self._send(Datagram(KIND_BYE, self.namespace))
        except OSError:
            pass
        self._sock.close()

    # -- internals ---------------------------------------------------------

    def _send(self, datagram):
        self._sock.sendto(encode(datagram), (self.group, self.port))

    def _announce_loop(self):
        while not self._closed.wait(self.announce_interval):
            try:
                self._send(Datagram(KIND_ANNOUNCE, self.namespace))
            except OSError:
                return

    def _receive_loop(self):
        while not self._closed.is_set():
            try:
                data, _ = self._sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                return
            try:
                datagram = decode(data)
            except Exception:
                continue
            if datagram.namespace == self.namespace:
                continue
            with self._lock:
                if datagram.kind == KIND_BYE:
                    self._peers.pop(datagram.namespace, None)
                    continue
                self._peers[datagram.namespace] = wall.monotonic()
                if datagram.kind == KIND_PUBLISH:
                    prior = self._topics.get(datagram.topic)
                    if prior is None or datagram.version >= prior.version:
                        self._topics[datagram.topic] = Topic(
                            datagram.topic, decode_value(datagram.payload),
                            datagram.version, datagram.namespace)
