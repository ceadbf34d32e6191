"""Wire frame codec.

Every unit on the wire, in either direction, is one frame (little-endian):

    magic    u16  = 0xB105
    version  u8   = 1
    kind     u8   1=data 2=topic-announce 3=param-set 4=param-ack 5=subscribe
    topic_id u16
    seq      u32
    t_wall   u64  ns since Unix epoch
    t_mono   u64  ns on the sender's monotonic clock
    msg_kind u8   payload kind tag (see messages.MsgKind); 0 for control frames
    len      u16  payload byte count
    payload  len bytes

Control payloads:
    topic-announce: name_len u16 | name utf8 | pub_count u16
                    (header msg_kind = the announced topic's message kind;
                    topic_id 0 from a client means "assign one")
    param-set/ack:  token u32 | key u8 | status u8 | value u32 | node utf8
    subscribe:      utf8 glob pattern
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

from .errors import NeedMoreBytes, ProtocolError
from .messages import MsgKind

MAGIC = 0xB105
VERSION = 1

_HEADER = struct.Struct("<HBBHIQQBH")
HEADER_SIZE = _HEADER.size  # 29


class FrameKind(IntEnum):
    DATA = 1
    ANNOUNCE = 2
    PARAM_SET = 3
    PARAM_ACK = 4
    SUBSCRIBE = 5


class ParamKey(IntEnum):
    SENSOR_ENABLE = 1
    CHUNK_ENABLE = 2
    CHUNK_LENGTH = 3


PARAM_KEY_NAMES = {
    ParamKey.SENSOR_ENABLE: "Sensor_Enable",
    ParamKey.CHUNK_ENABLE: "Chunk_Enable",
    ParamKey.CHUNK_LENGTH: "Chunk_Length",
}
PARAM_KEYS_BY_NAME = {v: k for k, v in PARAM_KEY_NAMES.items()}


class ParamStatus(IntEnum):
    OK = 0
    NODE_NOT_FOUND = 1
    PARAM_ERROR = 2


@dataclass
class Frame:
    kind: int
    topic_id: int = 0
    seq: int = 0
    t_wall_ns: int = 0
    t_mono_ns: int = 0
    msg_kind: int = 0
    payload: bytes = b""


def encode_frame(f: Frame) -> bytes:
    if len(f.payload) > 0xFFFF:
        raise ProtocolError(f"payload of {len(f.payload)} bytes exceeds u16 length field")
    return _HEADER.pack(
        MAGIC, VERSION, f.kind, f.topic_id, f.seq,
        f.t_wall_ns, f.t_mono_ns, f.msg_kind, len(f.payload),
    ) + f.payload


def decode_frame(buf: bytes, offset: int = 0) -> tuple[Frame, int]:
    """Decode one frame starting at `offset`; returns (frame, bytes consumed).

    Raises NeedMoreBytes if the buffer ends mid-frame, ProtocolError on
    malformed headers. Never reads past the declared payload length.
    """
    if len(buf) - offset < HEADER_SIZE:
        raise NeedMoreBytes(f"have {len(buf) - offset} bytes, header needs {HEADER_SIZE}")
    magic, version, kind, topic_id, seq, t_wall, t_mono, msg_kind, plen = \
        _HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic 0x{magic:04X}")
    if version != VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    try:
        kind = FrameKind(kind)
    except ValueError:
        raise ProtocolError(f"unknown frame kind {kind}") from None
    if kind == FrameKind.DATA:
        try:
            MsgKind(msg_kind)
        except ValueError:
            raise ProtocolError(f"unknown message kind {msg_kind}") from None
    end = offset + HEADER_SIZE + plen
    if len(buf) < end:
        raise NeedMoreBytes(f"payload cut short: need {plen} bytes")
    payload = bytes(buf[offset + HEADER_SIZE:end])
    return Frame(kind, topic_id, seq, t_wall, t_mono, msg_kind, payload), HEADER_SIZE + plen


class FrameSplitter:
    """Incremental decoder for a byte stream: feed() chunks, iterate frames."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Frame]:
        self._buf.extend(data)
        frames = []
        while True:
            try:
                frame, used = decode_frame(self._buf)
            except NeedMoreBytes:
                break
            del self._buf[:used]
            frames.append(frame)
        return frames


# -- control payload helpers -------------------------------------------------

def encode_announce(name: str, msg_kind: int, topic_id: int = 0, pub_count: int = 0) -> Frame:
    raw = name.encode()
    payload = struct.pack("<H", len(raw)) + raw + struct.pack("<H", pub_count)
    return Frame(FrameKind.ANNOUNCE, topic_id=topic_id, msg_kind=msg_kind, payload=payload)


def decode_announce(f: Frame) -> tuple[str, int, int]:
    """Returns (topic name, msg_kind, pub_count)."""
    if len(f.payload) < 4:
        raise ProtocolError("announce payload too short")
    (nlen,) = struct.unpack_from("<H", f.payload)
    if len(f.payload) != 2 + nlen + 2:
        raise ProtocolError("announce payload length mismatch")
    name = f.payload[2:2 + nlen].decode()
    (pub_count,) = struct.unpack_from("<H", f.payload, 2 + nlen)
    return name, f.msg_kind, pub_count


def encode_param(kind: FrameKind, token: int, key: int, value: int,
                 node: str, status: int = ParamStatus.OK) -> Frame:
    payload = struct.pack("<IBBI", token, key, status, value) + node.encode()
    return Frame(kind, payload=payload)


def decode_param(f: Frame) -> tuple[int, int, int, int, str]:
    """Returns (token, key, status, value, node)."""
    if len(f.payload) < 10:
        raise ProtocolError("param payload too short")
    token, key, status, value = struct.unpack_from("<IBBI", f.payload)
    return token, key, status, value, f.payload[10:].decode()


def encode_subscribe(pattern: str) -> Frame:
    return Frame(FrameKind.SUBSCRIBE, payload=pattern.encode())
