"""Acceptance suite: one test per release criterion, each printing a single
PASS/FAIL line. Run with `pytest -s tests/test_acceptance.py` to see them.

Ordering matters only for readability; every test stands alone on the shared
session broker fixture. The latency soak at the end runs for a full minute.
"""

import math
import random
import re
import string
import struct
import threading
import time

import numpy as np
import pytest

from biohub import simsig
from biohub.bag import BagWriter, play, read_bag, record
from biohub.drivers import SENSOR_SPECS
from biohub.drivers.nodes import NODE_FACTORIES
from biohub.errors import NeedMoreBytes, ProtocolError
from biohub.features import (
    FeatureJob, FeatureNode, Window, band_power, breath_rate, mean_hr_from_ibi,
    rmssd, sdnn,
)
from biohub.framing import Frame, FrameKind, decode_frame, encode_frame
from biohub.messages import MsgKind, encode_payload
from biohub.node import ChunkAccumulator, NodeParams
from biohub.simsig import SimConfig
from biohub.topics import is_valid_topic


def verdict(name: str, ok: bool, detail: str = ""):
    tail = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}{tail}", flush=True)
    assert ok, f"{name} failed: {detail}"


EXPECTED_TOPIC_COUNTS = {
    "empatica_e4": 11, "emotiv_insight": 7, "shimmer3_gsr": 4,
    "polar_h10": 1, "vernier_respiration_belt": 4, "zephyr_bioharness": 5,
}


# 1 -- topic conformance ------------------------------------------------------

def test_accept_topic_conformance(make_client, broker):
    for sensor, count in EXPECTED_TOPIC_COUNTS.items():
        node = NODE_FACTORIES[sensor]("sim", make_client(), cfg=SimConfig(seed=1),
                                      duration_s=0.0)
        node.announce_all()
    time.sleep(0.3)
    names = {t[0] for t in broker.topics()}
    ok = True
    for sensor, count in EXPECTED_TOPIC_COUNTS.items():
        want = {f"/biosensors/{sensor}/{c.name}" for c in SENSOR_SPECS[sensor].channels}
        mine = {n for n in names if n.startswith(f"/biosensors/{sensor}/")}
        ok = ok and mine == want and len(mine) == count
    verdict("topic-conformance", ok,
            f"{sum(EXPECTED_TOPIC_COUNTS.values())} topics across 6 drivers")


# 2 -- topic grammar ----------------------------------------------------------

def test_accept_topic_grammar():
    rng = random.Random(42)
    token = lambda: "".join(rng.choices(string.ascii_lowercase + string.digits + "_",
                                        k=rng.randint(1, 12)))
    ok = True
    for _ in range(500):
        s, d = token(), token()
        ok = ok and is_valid_topic(f"/biosensors/{s}/{d}")
        ok = ok and is_valid_topic(f"/biosensors/{s}/features/{d}")
    mutations = 0
    for _ in range(2000):
        s, d = token(), token()
        base = f"/biosensors/{s}/{d}"
        bad = rng.choice([
            base.upper(),
            base[1:],                               # missing leading slash
            base + "/",
            base + "/extra",
            f"/biosensors//{d}",
            f"/biosensors/{s}/{d}".replace("/", "//", 1),
            f"/sensors/{s}/{d}",
            f"/biosensors/{s}/{d}-x",
            f"/biosensors/{s} /{d}",
            f"/biosensors/{s}/Features/{d}",
        ])
        if bad != base:
            mutations += 1
            ok = ok and not is_valid_topic(bad)
    verdict("topic-grammar", ok, f"500 valid accepted, {mutations} mutants rejected")


# 3 -- rate conformance -------------------------------------------------------

def measured_rate(frames):
    if len(frames) < 2:
        return 0.0
    span = (frames[-1].t_mono_ns - frames[0].t_mono_ns) / 1e9
    return (len(frames) - 1) / span if span > 0 else 0.0


def test_accept_rate_conformance(make_client):
    t_start = time.monotonic()
    subs = {
        "eeg": make_client().subscribe("/biosensors/emotiv_insight/eeg"),
        "force": make_client().subscribe("/biosensors/vernier_respiration_belt/force"),
        "polar": make_client().subscribe("/biosensors/polar_h10/hr"),
        "zephyr": make_client().subscribe("/biosensors/zephyr_bioharness/*"),
    }
    nodes = [
        NODE_FACTORIES[s]("sim", make_client(), cfg=SimConfig(seed=7),
                          duration_s=10.0).start()
        for s in ("emotiv_insight", "vernier_respiration_belt", "polar_h10",
                  "zephyr_bioharness")
    ]
    time.sleep(11.0)
    for n in nodes:
        n.stop()
    eeg = subs["eeg"].drain()
    force = subs["force"].drain()
    polar = subs["polar"].drain()
    zephyr = subs["zephyr"].drain()
    eeg_hz, force_hz = measured_rate(eeg), measured_rate(force)
    ecg = [f for f in zephyr if f.topic.endswith("/ecg_chunk")]
    br = [f for f in zephyr if f.topic.endswith("/br_chunk")]
    runtime = time.monotonic() - t_start
    ok = (abs(eeg_hz - 128.0) <= 128.0 * 0.02
          and abs(force_hz - 50.0) <= 50.0 * 0.02
          and abs(len(polar) - 10) <= 1        # 1 Hz +-2 msgs/60 s, 10 s run
          and len(ecg) > 0 and all(len(f.values) == 63 for f in ecg)
          and len(br) > 0 and all(len(f.values) == 18 for f in br)
          and runtime < 60.0)
    verdict("rate-conformance", ok,
            f"eeg {eeg_hz:.2f} Hz, force {force_hz:.2f} Hz, polar {len(polar)} "
            f"msg/10 s, zephyr {len(ecg)}x63 + {len(br)}x18, {runtime:.1f} s")


# 4 -- chunk reconstruction ---------------------------------------------------

def test_accept_chunk_reconstruction():
    rng = random.Random(9)
    cases = 0
    ok = True
    for length in (1, 4, 64, 128, 1000):
        for _ in range(40):
            n = rng.randint(0, 4 * length + rng.randint(0, 50))
            raw = [rng.uniform(-100, 100) for _ in range(n)]
            acc = ChunkAccumulator(length)
            flat = [v for chunk in acc.extend(raw) for v in chunk]
            usable = (n // length) * length
            ok = ok and flat == raw[:usable] and acc.fill == n - usable
            cases += 1
    verdict("chunk-reconstruction", ok and cases >= 200,
            f"{cases} cases over lengths 1,4,64,128,1000")


# 5 -- runtime parameter gating ----------------------------------------------

def topic_tail(frame):
    return frame.topic.rsplit("/", 1)[1]


def test_accept_parameter_gating(make_client):
    sub = make_client().subscribe("/biosensors/shimmer3_gsr/*")
    node = NODE_FACTORIES["shimmer3_gsr"]("sim", make_client(), cfg=SimConfig(seed=3),
                                          duration_s=30.0,
                                          params=NodeParams(chunk_length=8)).start()
    ctrl = make_client()
    time.sleep(1.0)
    ok = len(sub.drain()) > 0

    ctrl.set_param("shimmer3_gsr", "Sensor_Enable", False)
    time.sleep(0.3)
    sub.drain()
    time.sleep(1.0)
    ok = ok and len(sub.drain()) == 0          # fully silent, incl. chunks

    ctrl.set_param("shimmer3_gsr", "Sensor_Enable", True)
    time.sleep(1.0)
    resumed = sub.drain()
    ok = ok and len(resumed) > 0

    ctrl.set_param("shimmer3_gsr", "Chunk_Enable", False)
    time.sleep(0.3)
    sub.drain()
    time.sleep(1.0)
    raw_only = sub.drain()
    ok = ok and len(raw_only) > 0
    ok = ok and not any(topic_tail(f).endswith("_chunk") for f in raw_only)

    ctrl.set_param("shimmer3_gsr", "Chunk_Enable", True)
    ctrl.set_param("shimmer3_gsr", "Chunk_Length", 4)
    time.sleep(0.3)
    sub.drain()
    time.sleep(1.5)
    after = sub.drain()
    chunks = [f for f in after if topic_tail(f).endswith("_chunk")]
    ok = ok and len(chunks) > 0 and all(len(f.values) == 4 for f in chunks)
    node.stop()
    verdict("parameter-gating", ok,
            "enable/disable, chunk gating, live chunk-length change")


# 6 -- codec round-trips and fuzz --------------------------------------------

def _random_frame(rng):
    kind = rng.choice(list(MsgKind))
    if kind == MsgKind.F32:
        values = [struct.unpack("<f", struct.pack("<f", rng.uniform(-1e6, 1e6)))[0]]
    elif kind == MsgKind.F32ARRAY:
        values = [struct.unpack("<f", struct.pack("<f", rng.uniform(-1e3, 1e3)))[0]
                  for _ in range(rng.randint(0, 200))]
    elif kind == MsgKind.U8:
        values = [rng.randint(0, 255)]
    elif kind == MsgKind.U16:
        values = [rng.randint(0, 65535)]
    else:
        values = None
    return Frame(kind=FrameKind.DATA, topic_id=rng.randint(0, 65535),
                 seq=rng.randint(0, 2**32 - 1), t_wall_ns=rng.randint(0, 2**64 - 1),
                 t_mono_ns=rng.randint(0, 2**64 - 1), msg_kind=kind,
                 payload=encode_payload(kind, values))


def test_accept_codec_roundtrip_and_fuzz():
    rng = random.Random(1234)
    ok = True
    for _ in range(10_000):
        f = _random_frame(rng)
        wire = encode_frame(f)
        back, used = decode_frame(wire)
        ok = ok and back == f and used == len(wire)
    fuzz_decoded = 0
    for _ in range(10_000):
        blob = rng.randbytes(rng.randint(0, 80))
        try:
            frame, used = decode_frame(blob)
        except (NeedMoreBytes, ProtocolError):
            continue
        # anything that decodes must re-encode to the identical bytes
        ok = ok and encode_frame(frame) == blob[:used]
        fuzz_decoded += 1
    verdict("codec-roundtrip-fuzz", ok,
            f"10000 round-trips exact, 10000 fuzz inputs, {fuzz_decoded} decodable")


# 7 -- recorder fidelity and replay drift ------------------------------------

def _essence(bag):
    return sorted((bag.topics[r.topic_id][0], r.seq, r.t_wall_ns, r.t_mono_ns,
                   r.payload) for r in bag.records)


def test_accept_recorder_fidelity(tmp_path, make_client):
    # record a live burst, replay it, re-record: byte-identical essence
    pub = make_client()
    path1, path2 = tmp_path / "one.bag", tmp_path / "two.bag"
    rec1 = threading.Thread(target=record,
                            args=(make_client(), ["/biosensors/*/*"], path1),
                            kwargs={"limit": 60})
    rec1.start()
    time.sleep(0.2)
    pub.announce("/biosensors/polar_h10/hr", MsgKind.F32)
    pub.announce("/biosensors/emotiv_insight/eeg", MsgKind.F32ARRAY)
    for i in range(30):
        pub.publish("/biosensors/polar_h10/hr", MsgKind.F32, [60.0 + i])
        pub.publish("/biosensors/emotiv_insight/eeg", MsgKind.F32ARRAY,
                    [float(i), 1.0, 2.0, 3.0, 4.0])
        time.sleep(0.004)
    rec1.join(10.0)
    bag1 = read_bag(path1)
    ok = bag1.complete and len(bag1.records) == 60

    rec2 = threading.Thread(target=record,
                            args=(make_client(), ["/biosensors/*/*"], path2),
                            kwargs={"limit": 60})
    rec2.start()
    time.sleep(0.2)
    play(path1, make_client(), rate_multiplier=10.0)
    rec2.join(10.0)
    ok = ok and _essence(read_bag(path2)) == _essence(bag1)

    # truncation: every cut of the file parses and yields a record prefix
    data = path1.read_bytes()
    rng = random.Random(5)
    full = [ (r.topic_id, r.seq, r.payload) for r in bag1.records ]
    for cut in sorted(rng.randrange(18, len(data)) for _ in range(80)):
        p = tmp_path / "cut.bag"
        p.write_bytes(data[:cut])
        got = [(r.topic_id, r.seq, r.payload) for r in read_bag(p).records]
        ok = ok and got == full[:len(got)]

    # drift: a bag spanning 30 s replays at 1x within 5 ms/min of nominal
    span_s = 30.0
    dpath = tmp_path / "drift.bag"
    with BagWriter(dpath) as w:
        w.add_topic(1, "/biosensors/polar_h10/hr", int(MsgKind.F32))
        n = int(span_s * 10) + 1
        for i in range(n):
            t_mono = int(i * 100_000_000)
            w.add_record(1, i, t_mono, t_mono, t_mono,
                         encode_payload(MsgKind.F32, [60.0]))
    # pacing drift is first-to-last frame spacing vs nominal span, measured
    # at a subscriber; setup costs (parsing, announces) are not drift
    arrivals = []
    drift_stop = threading.Event()
    dsub = make_client().subscribe("/biosensors/polar_h10/hr")

    def stamp():
        while not drift_stop.is_set():
            try:
                dsub.next_frame(timeout=0.5)
            except Exception:
                continue
            arrivals.append(time.monotonic_ns())

    stamper = threading.Thread(target=stamp, daemon=True)
    stamper.start()
    time.sleep(0.2)
    play(dpath, make_client(), rate_multiplier=1.0)
    time.sleep(0.5)
    drift_stop.set()
    stamper.join(2.0)
    ok = ok and len(arrivals) == n
    drift_ms = abs((arrivals[-1] - arrivals[0]) / 1e6 - span_s * 1000.0)
    allowed_ms = 5.0 * (span_s / 60.0)
    ok = ok and drift_ms <= allowed_ms
    verdict("recorder-fidelity", ok,
            f"round-trip identical, 80 truncations clean, "
            f"drift {drift_ms:.2f} ms over {span_s:.0f} s (allowed {allowed_ms:.1f})")


# 8 -- features vs oracles ----------------------------------------------------

def test_accept_features_vs_oracles():
    rng = random.Random(77)
    ok = True
    for _ in range(1000):
        ibi = [rng.uniform(0.4, 1.6) for _ in range(rng.randint(3, 100))]
        m = sum(ibi) / len(ibi)
        o_hr = 60.0 / m
        o_sdnn = math.sqrt(sum((v - m) ** 2 for v in ibi) / len(ibi)) * 1000.0
        d = [b - a for a, b in zip(ibi, ibi[1:])]
        o_rmssd = math.sqrt(sum(v * v for v in d) / len(d)) * 1000.0
        ok = ok and abs(mean_hr_from_ibi(ibi) - o_hr) <= 1e-9 * abs(o_hr)
        ok = ok and abs(sdnn(ibi) - o_sdnn) <= 1e-9 * max(abs(o_sdnn), 1e-12)
        ok = ok and abs(rmssd(ibi) - o_rmssd) <= 1e-9 * max(abs(o_rmssd), 1e-12)

    recovered = []
    for bpm in (8.0, 12.0, 15.0, 20.0):
        x = simsig.gen_respiration_force(SimConfig(seed=2, breath_rate_bpm=bpm),
                                         50.0, 50 * 60)
        est = breath_rate(Window(x, 50.0))
        recovered.append(est)
        ok = ok and abs(est - bpm) <= 1.0

    t = np.arange(128 * 10) / 128.0
    p = band_power(Window(20.0 * np.sin(2 * np.pi * 10.0 * t), 128.0))
    alpha_share = float(p[1] / np.sum(p))
    ok = ok and alpha_share > 0.90
    verdict("features-vs-oracles", ok,
            f"1000 HRV series at 1e-9 rel, breath "
            f"{['%.2f' % v for v in recovered]} bpm, alpha share {alpha_share:.3f}")


# 9 -- end-to-end latency soak ------------------------------------------------

def test_accept_latency_soak(tmp_path, make_client, broker):
    latencies = []
    stop = threading.Event()

    def consume(sub):
        while not stop.is_set():
            try:
                f = sub.next_frame(timeout=0.5)
            except Exception:
                continue
            latencies.append(time.monotonic_ns() - f.t_mono_ns)

    sub = make_client().subscribe("/biosensors/*/*")
    consumer = threading.Thread(target=consume, args=(sub,), daemon=True)
    consumer.start()

    rec_stop = threading.Event()
    recorder = threading.Thread(
        target=record,
        args=(make_client(), ["/biosensors/*/*"], tmp_path / "soak.bag"),
        kwargs={"stop_event": rec_stop})
    recorder.start()

    jobs = [
        FeatureJob("/biosensors/empatica_e4/ibi", "sdnn", "hrv_sdnn",
                   window_s=20.0, overlap=0.5),
        FeatureJob("/biosensors/vernier_respiration_belt/force_chunk",
                   "breath_rate", "breath_rate", rate_hz=50.0, window_s=25.0,
                   overlap=0.5),
    ]
    feat = FeatureNode(make_client(), jobs).start()
    feat_sub = make_client().subscribe("/biosensors/*/features/*")

    nodes = [NODE_FACTORIES[s]("sim", make_client(), cfg=SimConfig(seed=13),
                               duration_s=60.0).start()
             for s in SENSOR_SPECS]
    time.sleep(61.0)
    for n in nodes:
        n.stop()
    stop.set()
    rec_stop.set()
    recorder.join(5.0)
    feat.stop()
    consumer.join(2.0)

    feature_frames = feat_sub.drain()
    lat_ms = sorted(v / 1e6 for v in latencies)
    median_ms = lat_ms[len(lat_ms) // 2]
    p99_ms = lat_ms[int(len(lat_ms) * 0.99)]
    dropped = broker.total_dropped
    bag = read_bag(tmp_path / "soak.bag")
    ok = (median_ms < 5.0 and dropped == 0 and len(lat_ms) > 10_000
          and bag.complete and len(bag.records) > 10_000
          and len(feature_frames) > 0)
    verdict("latency-soak", ok,
            f"median {median_ms:.3f} ms, p99 {p99_ms:.3f} ms over "
            f"{len(lat_ms)} frames, drops {dropped}, "
            f"{len(bag.records)} recorded, {len(feature_frames)} feature frames")
