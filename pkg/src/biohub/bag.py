"""Single-file topic recording with bit-exact replay.

On-disk layout (little-endian):
    header   'BIOBAG1\\0' | version u16 | t_wall u64
    topic    0x01 | topic_id u16 | kind u8 | name_len u16 | name utf8
    record   0x02 | topic_id u16 | seq u32 | t_wall u64 | t_mono u64
                  | recv_t u64 | len u16 | payload
    trailer  0x03 | record_count u64 | crc32 u32   (CRC over all prior bytes)

Timestamps in records are the publisher's; recv_t is the recorder's own
receive time, kept as a side column for latency studies. A truncated file
(crash, disk full) stays readable up to the last complete record.
"""

from __future__ import annotations

import struct
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .bus.client import BusClient
from .errors import BusTimeout, ConnectionLost, FormatError, IoError
from .messages import MsgKind, decode_payload

MAGIC = b"BIOBAG1\0"
VERSION = 1

_HDR = struct.Struct("<8sHQ")
_TOPIC = struct.Struct("<BHBH")
_RECORD = struct.Struct("<BHIQQQH")
_TRAILER = struct.Struct("<BQI")

TAG_TOPIC = 0x01
TAG_RECORD = 0x02
TAG_TRAILER = 0x03


@dataclass
class BagRecord:
    topic_id: int
    seq: int
    t_wall_ns: int
    t_mono_ns: int
    recv_t_ns: int
    payload: bytes


@dataclass
class BagContents:
    created_ns: int
    topics: dict[int, tuple[str, int]]       # topic_id -> (name, msg_kind)
    records: list[BagRecord]
    complete: bool                            # trailer present and CRC good
    record_count: int = 0


class BagWriter:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            self._fh = self.path.open("wb")
        except OSError as exc:
            raise IoError(f"cannot open {self.path}: {exc}") from exc
        self._crc = 0
        self._count = 0
        self._known: set[int] = set()
        self._write(_HDR.pack(MAGIC, VERSION, time.time_ns()))

    def _write(self, data: bytes):
        try:
            self._fh.write(data)
        except OSError as exc:
            raise IoError(f"write to {self.path} failed: {exc}") from exc
        self._crc = zlib.crc32(data, self._crc)

    def add_topic(self, topic_id: int, name: str, msg_kind: int):
        if topic_id in self._known:
            return
        self._known.add(topic_id)
        raw = name.encode()
        self._write(_TOPIC.pack(TAG_TOPIC, topic_id, msg_kind, len(raw)) + raw)

    def add_record(self, topic_id: int, seq: int, t_wall_ns: int, t_mono_ns: int,
                   recv_t_ns: int, payload: bytes):
        if topic_id not in self._known:
            raise IoError(f"record for unregistered topic id {topic_id}")
        self._write(_RECORD.pack(TAG_RECORD, topic_id, seq, t_wall_ns, t_mono_ns,
                                 recv_t_ns, len(payload)) + payload)
        self._count += 1

    @property
    def record_count(self) -> int:
        return self._count

    def close(self):
        if self._fh.closed:
            return
        # crc covers everything before the trailer's own crc field
        head = struct.pack("<BQ", TAG_TRAILER, self._count)
        crc = zlib.crc32(head, self._crc)
        self._fh.write(head + struct.pack("<I", crc))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_bag(path: str | Path) -> BagContents:
    """Parse a bag, recovering all complete records from truncated files."""
    data = Path(path).read_bytes()
    if len(data) < _HDR.size:
        raise FormatError(f"{path}: too short for a bag header")
    magic, version, created = _HDR.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported bag version {version}")
    topics: dict[int, tuple[str, int]] = {}
    records: list[BagRecord] = []
    pos = _HDR.size
    complete = False
    declared = 0
    while pos < len(data):
        tag = data[pos]
        if tag == TAG_TOPIC:
            if pos + _TOPIC.size > len(data):
                break
            _, tid, kind, nlen = _TOPIC.unpack_from(data, pos)
            if pos + _TOPIC.size + nlen > len(data):
                break
            name = data[pos + _TOPIC.size:pos + _TOPIC.size + nlen].decode()
            topics[tid] = (name, kind)
            pos += _TOPIC.size + nlen
        elif tag == TAG_RECORD:
            if pos + _RECORD.size > len(data):
                break
            _, tid, seq, t_wall, t_mono, recv_t, plen = _RECORD.unpack_from(data, pos)
            end = pos + _RECORD.size + plen
            if end > len(data):
                break
            if tid not in topics:
                raise FormatError(f"{path}: record at {pos} references unknown topic {tid}")
            records.append(BagRecord(tid, seq, t_wall, t_mono, recv_t,
                                     data[pos + _RECORD.size:end]))
            pos = end
        elif tag == TAG_TRAILER:
            if pos + _TRAILER.size > len(data):
                break
            _, declared, crc = _TRAILER.unpack_from(data, pos)
            expect = zlib.crc32(data[:pos + 1 + 8])
            complete = crc == expect and declared == len(records)
            pos += _TRAILER.size
            break
        else:
            raise FormatError(f"{path}: unknown tag 0x{tag:02X} at offset {pos}")
    return BagContents(created_ns=created, topics=topics, records=records,
                       complete=complete, record_count=declared or len(records))


# -- high-level operations ---------------------------------------------------

def record(client: BusClient, patterns: Sequence[str], path: str | Path,
           limit: int | None = None, duration_s: float | None = None,
           stop_event=None) -> int:
    """Subscribe to matching topics and append every frame until a limit,
    duration, or stop event ends the run. Returns the record count."""
    sub = client.subscribe(list(patterns))
    ids: dict[str, int] = {}
    deadline = time.monotonic() + duration_s if duration_s else None
    with BagWriter(path) as writer:
        while True:
            if limit is not None and writer.record_count >= limit:
                break
            if stop_event is not None and stop_event.is_set():
                break
            timeout = 0.2
            if deadline is not None:
                timeout = min(timeout, deadline - time.monotonic())
                if timeout <= 0:
                    break
            try:
                frame = sub.next_frame(timeout=timeout)
            except BusTimeout:
                continue
            except ConnectionLost:
                break
            tid = ids.get(frame.topic)
            if tid is None:
                tid = len(ids) + 1
                ids[frame.topic] = tid
                writer.add_topic(tid, frame.topic, int(frame.kind))
            writer.add_record(tid, frame.seq, frame.t_wall_ns, frame.t_mono_ns,
                              time.time_ns(), frame.payload)
        return writer.record_count


def play(path: str | Path, client: BusClient, rate_multiplier: float = 1.0) -> int:
    """Republish a bag on its original topics, scaling inter-frame gaps by
    1/rate_multiplier and preserving original seq numbers and timestamps.
    Returns the number of frames replayed."""
    if rate_multiplier <= 0:
        raise ValueError("rate_multiplier must be positive")
    bag = read_bag(path)
    if not bag.records:
        return 0
    for tid, (name, kind) in bag.topics.items():
        client.announce(name, MsgKind(kind))
    t0_bag = bag.records[0].t_mono_ns
    t0_here = time.monotonic_ns()
    for rec in bag.records:
        due = t0_here + int((rec.t_mono_ns - t0_bag) / rate_multiplier)
        # coarse sleep, then a short spin: plain sleep() can overshoot by
        # milliseconds, which accumulates as replay drift
        delay = (due - time.monotonic_ns()) / 1e9
        if delay > 0.003:
            time.sleep(delay - 0.003)
        while time.monotonic_ns() < due:
            pass
        name, kind = bag.topics[rec.topic_id]
        client.publish_raw(name, kind, rec.payload, rec.seq,
                           rec.t_wall_ns, rec.t_mono_ns)
    return len(bag.records)


def bag_info(path: str | Path) -> dict:
    """Per-topic counts, overall duration, and mean rates."""
    bag = read_bag(path)
    counts: dict[str, int] = {}
    kinds: dict[str, str] = {}
    for rec in bag.records:
        name, kind = bag.topics[rec.topic_id]
        counts[name] = counts.get(name, 0) + 1
        kinds[name] = MsgKind(kind).name
    if bag.records:
        duration_ns = bag.records[-1].t_mono_ns - bag.records[0].t_mono_ns
    else:
        duration_ns = 0
    duration_s = duration_ns / 1e9
    return {
        "path": str(path),
        "created_ns": bag.created_ns,
        "complete": bag.complete,
        "record_count": len(bag.records),
        "duration_s": duration_s,
        "topics": [
            {
                "name": name,
                "kind": kinds[name],
                "count": counts[name],
                "rate_hz": counts[name] / duration_s if duration_s > 0 else 0.0,
            }
            for name in sorted(counts)
        ],
    }


def export_csv(path: str | Path, out_dir: str | Path) -> list[Path]:
    """One CSV per topic: t_wall_ns,seq,values..."""
    bag = read_bag(path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    handles: dict[int, object] = {}
    written: list[Path] = []
    try:
        for rec in bag.records:
            fh = handles.get(rec.topic_id)
            if fh is None:
                name, _ = bag.topics[rec.topic_id]
                out_path = out_dir / (name.strip("/").replace("/", "__") + ".csv")
                fh = out_path.open("w")
                fh.write("t_wall_ns,seq,values\n")
                handles[rec.topic_id] = fh
                written.append(out_path)
            _, kind = bag.topics[rec.topic_id]
            values = decode_payload(kind, rec.payload)
            cells = ",".join(repr(v) for v in values)
            fh.write(f"{rec.t_wall_ns},{rec.seq}" + ("," + cells if cells else "") + "\n")
    finally:
        for fh in handles.values():
            fh.close()
    return written
