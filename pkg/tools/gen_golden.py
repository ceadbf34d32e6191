"""Regenerates the golden wire corpus shared by all protocol clients.

Writes a concatenated stream of frames (frames.bin) plus the expected
decode of each frame (frames.json). Any client implementation, in any
language, must reproduce frames.json exactly from frames.bin.

Usage: python3 tools/gen_golden.py [out_dir]   (default: golden/)
"""

import json
import random
import struct
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from biohub.framing import (  # noqa: E402
    Frame, FrameKind, ParamKey, ParamStatus, encode_announce, encode_frame,
    encode_param, encode_subscribe,
)
from biohub.messages import MsgKind, decode_payload, encode_payload  # noqa: E402


def f32(v: float) -> float:
    return struct.unpack("<f", struct.pack("<f", v))[0]


def data_frame(rng, kind, values, topic_id=None, seq=None):
    return Frame(
        kind=FrameKind.DATA,
        topic_id=topic_id if topic_id is not None else rng.randint(1, 65535),
        seq=seq if seq is not None else rng.randint(0, 2**32 - 1),
        t_wall_ns=rng.randint(0, 2**64 - 1),
        t_mono_ns=rng.randint(0, 2**64 - 1),
        msg_kind=kind,
        payload=encode_payload(kind, values),
    )


def build_frames(rng):
    frames = []
    # hand-picked edge cases first
    frames.append(data_frame(rng, MsgKind.F32, [f32(72.5)], topic_id=1, seq=0))
    frames.append(data_frame(rng, MsgKind.F32, [0.0]))
    frames.append(data_frame(rng, MsgKind.F32, [f32(-1e-30)]))
    frames.append(data_frame(rng, MsgKind.F32, [f32(3.4028234663852886e38)]))
    frames.append(data_frame(rng, MsgKind.F32, [f32(1.401298464324817e-45)]))
    frames.append(data_frame(rng, MsgKind.F32ARRAY, []))
    frames.append(data_frame(rng, MsgKind.F32ARRAY, [f32(v) for v in (1.5, -2.25, 3e7)]))
    frames.append(data_frame(rng, MsgKind.U8, [0]))
    frames.append(data_frame(rng, MsgKind.U8, [255]))
    frames.append(data_frame(rng, MsgKind.U16, [0]))
    frames.append(data_frame(rng, MsgKind.U16, [65535]))
    frames.append(data_frame(rng, MsgKind.EMPTY, None, topic_id=9, seq=4_294_967_295))
    tmax = Frame(kind=FrameKind.DATA, topic_id=65535, seq=2**32 - 1,
                 t_wall_ns=2**64 - 1, t_mono_ns=2**64 - 1, msg_kind=MsgKind.U8,
                 payload=encode_payload(MsgKind.U8, [7]))
    frames.append(tmax)
    # control frames
    frames.append(encode_announce("/biosensors/polar_h10/hr", MsgKind.F32,
                                  topic_id=3, pub_count=1))
    frames.append(encode_announce("/biosensors/emotiv_insight/features/band_power",
                                  MsgKind.F32ARRAY, topic_id=300, pub_count=2))
    frames.append(encode_param(FrameKind.PARAM_SET, token=1, key=ParamKey.SENSOR_ENABLE,
                               status=ParamStatus.OK, value=0, node="polar_h10"))
    frames.append(encode_param(FrameKind.PARAM_SET, token=77,
                               key=ParamKey.CHUNK_LENGTH, status=ParamStatus.OK,
                               value=1000, node="shimmer3_gsr"))
    frames.append(encode_param(FrameKind.PARAM_ACK, token=77,
                               key=ParamKey.CHUNK_LENGTH, status=ParamStatus.OK,
                               value=1000, node="shimmer3_gsr"))
    frames.append(encode_param(FrameKind.PARAM_ACK, token=9,
                               key=ParamKey.CHUNK_ENABLE,
                               status=ParamStatus.NODE_NOT_FOUND, value=1,
                               node="ghost"))
    frames.append(encode_subscribe("/biosensors/*/*"))
    frames.append(encode_subscribe("/biosensors/empatica_e4/features/*"))
    # randomized bulk
    for _ in range(200):
        kind = rng.choice(list(MsgKind))
        if kind == MsgKind.F32:
            values = [f32(rng.uniform(-1e6, 1e6))]
        elif kind == MsgKind.F32ARRAY:
            values = [f32(rng.uniform(-1e3, 1e3)) for _ in range(rng.randint(0, 150))]
        elif kind == MsgKind.U8:
            values = [rng.randint(0, 255)]
        elif kind == MsgKind.U16:
            values = [rng.randint(0, 65535)]
        else:
            values = None
        frames.append(data_frame(rng, kind, values))
    return frames


def describe(frame: Frame, offset: int, wire: bytes) -> dict:
    entry = {
        "offset": offset,
        "length": len(wire),
        "frame_kind": int(frame.kind),
        "topic_id": frame.topic_id,
        "seq": frame.seq,
        "t_wall_ns": str(frame.t_wall_ns),
        "t_mono_ns": str(frame.t_mono_ns),
        "msg_kind": int(frame.msg_kind),
        "payload_hex": frame.payload.hex(),
    }
    if frame.kind == FrameKind.DATA:
        entry["values"] = list(decode_payload(frame.msg_kind, frame.payload))
    elif frame.kind == FrameKind.ANNOUNCE:
        nlen = struct.unpack_from("<H", frame.payload)[0]
        entry["announce"] = {
            "name": frame.payload[2:2 + nlen].decode(),
            "pub_count": struct.unpack_from("<H", frame.payload, 2 + nlen)[0],
        }
    elif frame.kind in (FrameKind.PARAM_SET, FrameKind.PARAM_ACK):
        token, key, status = struct.unpack_from("<IBB", frame.payload)
        value = struct.unpack_from("<I", frame.payload, 6)[0]
        entry["param"] = {"token": token, "key": key, "status": status,
                         "value": value, "node": frame.payload[10:].decode()}
    elif frame.kind == FrameKind.SUBSCRIBE:
        entry["pattern"] = frame.payload.decode()
    return entry


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else \
        Path(__file__).resolve().parent.parent / "golden"
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20260824)
    frames = build_frames(rng)
    blob = bytearray()
    entries = []
    for frame in frames:
        wire = encode_frame(frame)
        entries.append(describe(frame, len(blob), wire))
        blob += wire
    (out_dir / "frames.bin").write_bytes(bytes(blob))
    (out_dir / "frames.json").write_text(json.dumps(entries, indent=1) + "\n")
    print(f"wrote {len(frames)} frames, {len(blob)} bytes, to {out_dir}/")


if __name__ == "__main__":
    main()
