"""Datagram codec for the UDP transport.

Layout (all integers big-endian):
    magic "MBBT" | version u8 = 1 | kind u8 | namespace len u16 + bytes |
    topic len u16 + bytes | topic version u64 | payload len u32 + bytes
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

MAGIC = b"MBBT"
PROTOCOL_VERSION = 1

KIND_ANNOUNCE = 0
KIND_PUBLISH = 1
KIND_BYE = 2

_KINDS = (KIND_ANNOUNCE, KIND_PUBLISH, KIND_BYE)

DEFAULT_GROUP = "239.255.42.1"
DEFAULT_PORT = 7447


class WireError(Exception):
    pass


@dataclass(frozen=True)
class Datagram:
    kind: int
    namespace: str
    topic: str = ""
    version: int = 0
    payload: bytes = b""


def encode(datagram):
    if datagram.kind not in _KINDS:
        raise WireError(f"unknown message kind {datagram.kind}")
    namespace = datagram.namespace.encode()
    topic = datagram.topic.encode()
    if len(namespace) > 0xFFFF or len(topic) > 0xFFFF:
        raise WireError("name too long")
    return b"".join([
        MAGIC,
        struct.pack(">BB", PROTOCOL_VERSION, datagram.kind),
        struct.pack(">H", len(namespace)), namespace,
        struct.pack(">H", len(topic)), topic,
        struct.pack(">Q", datagram.version),
        struct.pack(">I", len(datagram.payload)), datagram.payload,
    ])


def decode(data):
    if len(data) < 4 or data[:4] != MAGIC:
        raise WireError("bad magic")
    offset = 4
    try:
        version, kind = struct.unpack_from(">BB", data, offset)
        offset += 2
        if version != PROTOCOL_VERSION:
            raise WireError(f"unsupported protocol version {version}")
        if kind not in _KINDS:
            raise WireError(f"unknown message kind {kind}")
        (ns_len,) = struct.unpack_from(">H", data, offset)
        offset += 2
        namespace = data[offset:offset + ns_len].decode()
        offset += ns_len
        (topic_len,) = struct.unpack_from(">H", data, offset)
        offset += 2
        topic = data[offset:offset + topic_len].decode()
        offset += topic_len
        (topic_version,) = struct.unpack_from(">Q", data, offset)
        offset += 8
        (payload_len,) = struct.unpack_from(">I", data, offset)
        offset += 4
        payload = data[offset:offset + payload_len]
        if len(payload) != payload_len:
            raise WireError("truncated payload")
    except struct.error as exc:
        raise WireError(f"truncated datagram: {exc}") from None
    return Datagram(kind, namespace, topic, topic_version, payload)


def encode_value(value):
    return json.dumps(value, sort_keys=True, separators=(",", ":")).encode()


def decode_value(payload):
    return json.loads(payload.decode())
