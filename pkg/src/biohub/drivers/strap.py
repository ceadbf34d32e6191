"""Chest-strap serial framing with CRC and resynchronization.

Frame layout: start byte 0x02, msg_id u8, payload length u8, payload,
CRC-8 (polynomial 0x8C reflected, init 0) over msg_id + length + payload.
The deframer scans for the start byte, drops CRC failures, and counts
everything it skips, so it survives arbitrary garbage on the line.
"""

from __future__ import annotations

from dataclasses import dataclass

START_BYTE = 0x02
_CRC_POLY = 0x8C  # reflected 0x31 (Dallas/Maxim)


def _make_crc_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = (crc >> 1) ^ _CRC_POLY if crc & 1 else crc >> 1
        table.append(crc)
    return table


_CRC_TABLE = _make_crc_table()


def crc8(data: bytes, init: int = 0) -> int:
    crc = init
    for b in data:
        crc = _CRC_TABLE[crc ^ b]
    return crc


@dataclass(frozen=True)
class StrapFrame:
    msg_id: int
    payload: bytes

    @property
    def crc(self) -> int:
        return crc8(bytes([self.msg_id, len(self.payload)]) + self.payload)


def frame_strap(f: StrapFrame) -> bytes:
    if not 0 <= f.msg_id <= 0xFF:
        raise ValueError(f"msg_id out of range: {f.msg_id}")
    if len(f.payload) > 0xFF:
        raise ValueError(f"payload too long: {len(f.payload)}")
    body = bytes([f.msg_id, len(f.payload)]) + f.payload
    return bytes([START_BYTE]) + body + bytes([crc8(body)])


class StrapDeframer:
    """Incremental parser: feed() byte chunks, collect validated frames."""

    def __init__(self):
        self._buf = bytearray()
        self.frames_ok = 0
        self.crc_errors = 0
        self.bytes_skipped = 0

    def feed(self, data: bytes) -> list[StrapFrame]:
        self._buf.extend(data)
        out = []
        while True:
            start = self._buf.find(START_BYTE)
            if start < 0:
                self.bytes_skipped += len(self._buf)
                self._buf.clear()
                break
            if start > 0:
                self.bytes_skipped += start
                del self._buf[:start]
            if len(self._buf) < 3:
                break  # need msg_id + length at least
            plen = self._buf[2]
            total = 4 + plen  # start + id + len + payload + crc
            if len(self._buf) < total:
                break
            body = bytes(self._buf[1:3 + plen])
            if crc8(body) == self._buf[3 + plen]:
                out.append(StrapFrame(msg_id=body[0], payload=body[2:]))
                self.frames_ok += 1
                del self._buf[:total]
            else:
                # false or corrupted start: advance one byte and rescan
                self.crc_errors += 1
                self.bytes_skipped += 1
                del self._buf[:1]
        return out


def deframe_strap(data: bytes) -> tuple[list[StrapFrame], StrapDeframer]:
    """One-shot convenience over StrapDeframer; returns (frames, stats)."""
    d = StrapDeframer()
    frames = d.feed(data)
    return frames, d
