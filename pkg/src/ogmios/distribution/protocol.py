"""Length-prefixed wire format between the coordinator and workers.

Frame layout (all integers unsigned big-endian)::

    0   4 bytes  magic b"OGMS"
    4   uint32   header length H
    8   uint32   payload length P
    12  H bytes  header: UTF-8 lines "key=value" joined by "\\n",
                 first line "type=<HELLO|DISPATCH|RESULT|ACK>",
                 values percent-encoded
    12+H P bytes payload (opaque; UTF-8 XML or raw document bytes)

See docs/protocol.md for the per-message fields.
"""
from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Optional
from urllib.parse import quote, unquote

from ..model import TimingRecord

MAGIC = b"OGMS"
PREFIX = struct.Struct(">4sII")
MAX_HEADER = 64 * 1024
MAX_PAYLOAD = 512 * 1024 * 1024

HELLO = "HELLO"
DISPATCH = "DISPATCH"
RESULT = "RESULT"
ACK = "ACK"
MESSAGE_TYPES = (HELLO, DISPATCH, RESULT, ACK)
_KEY = re.compile(r"[A-Za-z0-9_]+")


class ProtocolError(Exception):
    pass


class ConnectionClosed(ProtocolError):
    pass


@dataclass
class Message:
    type: str
    fields: dict = field(default_factory=dict)
    payload: bytes = b""

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.fields.get(key, default)

    def require(self, key: str) -> str:
        try:
            return self.fields[key]
        except KeyError:
            raise ProtocolError(f"{self.type} message lacks field {key!r}") from None


def encode(msg: Message) -> bytes:
    if msg.type not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {msg.type!r}")
    lines = [f"type={msg.type}"]
    for key, value in msg.fields.items():
        if not _KEY.fullmatch(key) or key == "type":
            raise ProtocolError(f"bad header key {key!r}")
        lines.append(f"{key}={quote(str(value), safe='')}")
    header = "\n".join(lines).encode("utf-8")
    if len(header) > MAX_HEADER:
        raise ProtocolError("header too large")
    return PREFIX.pack(MAGIC, len(header), len(msg.payload)) + header + msg.payload


def decode_header(header: bytes) -> tuple:
    try:
        lines = header.decode("utf-8").split("\n")
    except UnicodeDecodeError:
        raise ProtocolError("header is not UTF-8") from None
    fields = {}
    for line in lines:
        key, sep, value = line.partition("=")
        if not sep:
            raise ProtocolError(f"malformed header line {line!r}")
        fields[key] = unquote(value)
    mtype = fields.pop("type", None)
    if lines[0].partition("=")[0] != "type" or mtype not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown or missing message type {mtype!r}")
    return mtype, fields


def decode(frame: bytes) -> Message:
    """Decode exactly one complete frame."""
    if len(frame) < PREFIX.size:
        raise ProtocolError("truncated frame")
    magic, hlen, plen = PREFIX.unpack_from(frame)
    if magic != MAGIC:
        raise ProtocolError("bad magic")
    if len(frame) != PREFIX.size + hlen + plen:
        raise ProtocolError("frame length mismatch")
    mtype, fields = decode_header(frame[PREFIX.size:PREFIX.size + hlen])
    return Message(mtype, fields, frame[PREFIX.size + hlen:])


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            raise ConnectionClosed("connection closed mid-frame" if chunks or n != remaining else "connection closed")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_message(stream: BinaryIO) -> Message:
    prefix = _read_exact(stream, PREFIX.size)
    magic, hlen, plen = PREFIX.unpack(prefix)
    if magic != MAGIC:
        raise ProtocolError("bad magic")
    if hlen > MAX_HEADER or plen > MAX_PAYLOAD:
        raise ProtocolError("frame too large")
    mtype, fields = decode_header(_read_exact(stream, hlen))
    return Message(mtype, fields, _read_exact(stream, plen) if plen else b"")


def write_message(stream: BinaryIO, msg: Message) -> None:
    stream.write(encode(msg))
    stream.flush()


def encode_timings(timings) -> str:
    return ",".join(f"{t.step}:{t.wall_seconds!r}" for t in timings)


def decode_timings(value: Optional[str]) -> tuple:
    if not value:
        return ()
    out = []
    for item in value.split(","):
        step, _, seconds = item.rpartition(":")
        try:
            out.append(TimingRecord(step, float(seconds)))
        except ValueError:
            raise ProtocolError(f"bad timing entry {item!r}") from None
    return tuple(out)
