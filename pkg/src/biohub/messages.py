"""Message payload codec: the five payload kinds carried inside a frame.

Payload layouts (little-endian):
    F32       4-byte IEEE-754 float
    F32Array  u16 element count, then count * 4-byte floats
    U8        one byte
    U16       2-byte unsigned
    Empty     zero bytes
"""

from __future__ import annotations

import struct
from enum import IntEnum
from typing import Sequence

from .errors import EncodeError, ProtocolError

# payload_len is a u16, so an F32Array payload caps out at
# (65535 - 2) // 4 elements even though the count field could hold more.
MAX_ARRAY_LEN = (0xFFFF - 2) // 4


class MsgKind(IntEnum):
    F32 = 1
    F32ARRAY = 2
    U8 = 3
    U16 = 4
    EMPTY = 5


def encode_payload(kind: MsgKind, values: Sequence[float] | None) -> bytes:
    if kind == MsgKind.F32:
        return struct.pack("<f", values[0])
    if kind == MsgKind.F32ARRAY:
        if len(values) > MAX_ARRAY_LEN:
            raise EncodeError(f"array of {len(values)} elements exceeds wire limit {MAX_ARRAY_LEN}")
        return struct.pack(f"<H{len(values)}f", len(values), *values)
    if kind == MsgKind.U8:
        v = int(values[0])
        if not 0 <= v <= 0xFF:
            raise EncodeError(f"u8 out of range: {v}")
        return struct.pack("<B", v)
    if kind == MsgKind.U16:
        v = int(values[0])
        if not 0 <= v <= 0xFFFF:
            raise EncodeError(f"u16 out of range: {v}")
        return struct.pack("<H", v)
    if kind == MsgKind.EMPTY:
        return b""
    raise EncodeError(f"unknown message kind: {kind}")


def decode_payload(kind: int, payload: bytes) -> tuple:
    """Returns the payload as a tuple of numbers (empty for Empty)."""
    try:
        kind = MsgKind(kind)
    except ValueError:
        raise ProtocolError(f"unknown message kind tag: {kind}") from None
    if kind == MsgKind.F32:
        if len(payload) != 4:
            raise ProtocolError(f"F32 payload must be 4 bytes, got {len(payload)}")
        return struct.unpack("<f", payload)
    if kind == MsgKind.F32ARRAY:
        if len(payload) < 2:
            raise ProtocolError("F32Array payload missing count")
        (count,) = struct.unpack_from("<H", payload)
        if len(payload) != 2 + 4 * count:
            raise ProtocolError(
                f"F32Array count {count} disagrees with payload size {len(payload)}")
        return struct.unpack_from(f"<{count}f", payload, 2)
    if kind == MsgKind.U8:
        if len(payload) != 1:
            raise ProtocolError(f"U8 payload must be 1 byte, got {len(payload)}")
        return struct.unpack("<B", payload)
    if kind == MsgKind.U16:
        if len(payload) != 2:
            raise ProtocolError(f"U16 payload must be 2 bytes, got {len(payload)}")
        return struct.unpack("<H", payload)
    if len(payload) != 0:
        raise ProtocolError(f"Empty payload must be 0 bytes, got {len(payload)}")
    return ()
