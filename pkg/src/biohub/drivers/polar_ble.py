"""Codec for the BLE heart-rate measurement characteristic used by the
Polar H10 chest strap.

Layout: flags u8, then heart rate as u8 (flags bit0 clear) or u16 LE
(bit0 set), then energy expended u16 LE if bit3 is set, then zero or
more RR intervals as u16 LE in 1/1024 s units if bit4 is set.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from ..errors import CodecError

FLAG_HR_U16 = 0x01
FLAG_ENERGY = 0x08
FLAG_RR = 0x10

RR_UNIT_S = 1.0 / 1024.0


@dataclass
class HrMeasurement:
    hr: int
    energy: int | None = None
    rr_intervals: list[int] = field(default_factory=list)  # 1/1024 s units
    hr_is_u16: bool = False

    @property
    def rr_seconds(self) -> list[float]:
        return [rr * RR_UNIT_S for rr in self.rr_intervals]


def encode_hr_measurement(m: HrMeasurement) -> bytes:
    flags = 0
    wide = m.hr_is_u16 or m.hr > 0xFF
    if wide:
        flags |= FLAG_HR_U16
    if m.energy is not None:
        flags |= FLAG_ENERGY
    if m.rr_intervals:
        flags |= FLAG_RR
    out = bytearray([flags])
    if wide:
        out += struct.pack("<H", m.hr)
    else:
        out.append(m.hr)
    if m.energy is not None:
        out += struct.pack("<H", m.energy)
    for rr in m.rr_intervals:
        out += struct.pack("<H", rr)
    return bytes(out)


def decode_hr_measurement(data: bytes) -> tuple[HrMeasurement, int]:
    """Decode one measurement; returns (measurement, bytes consumed)."""
    if len(data) < 1:
        raise CodecError("empty heart-rate measurement")
    flags = data[0]
    pos = 1
    wide = bool(flags & FLAG_HR_U16)
    try:
        if wide:
            (hr,) = struct.unpack_from("<H", data, pos)
            pos += 2
        else:
            hr = data[pos]
            pos += 1
        energy = None
        if flags & FLAG_ENERGY:
            (energy,) = struct.unpack_from("<H", data, pos)
            pos += 2
        rr: list[int] = []
        if flags & FLAG_RR:
            if (len(data) - pos) % 2:
                raise CodecError("odd trailing byte in RR interval list")
            while pos < len(data):
                (v,) = struct.unpack_from("<H", data, pos)
                rr.append(v)
                pos += 2
    except (struct.error, IndexError):
        raise CodecError(f"truncated measurement for flags 0x{flags:02X}") from None
    return HrMeasurement(hr=hr, energy=energy, rr_intervals=rr, hr_is_u16=wide), pos


def ble_notification_stream(notifications):
    """Sample source adapter: decodes BLE notifications into ('hr', bpm)
    events for the Polar node."""
    for data in notifications:
        m, _ = decode_hr_measurement(bytes(data))
        yield "hr", float(m.hr)
