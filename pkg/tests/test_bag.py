"""Bag recording: bit-exact round trips, truncation tolerance, replay timing."""

import random
import struct
import threading
import time
import zlib
from pathlib import Path

import pytest

from biohub.bag import BagWriter, bag_info, export_csv, play, read_bag, record
from biohub.errors import FormatError, IoError
from biohub.messages import MsgKind, encode_payload


def write_sample_bag(path: Path, n_records: int = 50, seed: int = 0) -> list:
    """Build a deterministic bag directly through the writer; returns the
    (topic_id, seq, t_wall, t_mono, payload) tuples as ground truth."""
    rng = random.Random(seed)
    truth = []
    with BagWriter(path) as w:
        w.add_topic(1, "/biosensors/polar_h10/hr", int(MsgKind.F32))
        w.add_topic(2, "/biosensors/zephyr_bioharness/ecg_chunk", int(MsgKind.F32ARRAY))
        t_mono = 1_000_000
        for i in range(n_records):
            tid = rng.choice([1, 2])
            if tid == 1:
                payload = encode_payload(MsgKind.F32, [rng.uniform(40, 180)])
            else:
                payload = encode_payload(
                    MsgKind.F32ARRAY, [rng.uniform(-2, 2) for _ in range(63)])
            t_mono += rng.randint(1_000_000, 20_000_000)
            truth.append((tid, i, 10**18 + t_mono, t_mono, payload))
            w.add_record(tid, i, 10**18 + t_mono, t_mono, t_mono + 500, payload)
    return truth


def test_roundtrip_bit_exact(tmp_path):
    path = tmp_path / "a.bag"
    truth = write_sample_bag(path)
    bag = read_bag(path)
    assert bag.complete
    assert bag.topics == {1: ("/biosensors/polar_h10/hr", int(MsgKind.F32)),
                          2: ("/biosensors/zephyr_bioharness/ecg_chunk",
                              int(MsgKind.F32ARRAY))}
    got = [(r.topic_id, r.seq, r.t_wall_ns, r.t_mono_ns, r.payload)
           for r in bag.records]
    assert got == truth


def test_empty_bag(tmp_path):
    path = tmp_path / "empty.bag"
    with BagWriter(path):
        pass
    bag = read_bag(path)
    assert bag.complete and bag.records == [] and bag.topics == {}


def test_unregistered_topic_rejected(tmp_path):
    w = BagWriter(tmp_path / "x.bag")
    with pytest.raises(IoError):
        w.add_record(9, 0, 0, 0, 0, b"")
    w.close()


def test_bad_magic_and_version(tmp_path):
    p = tmp_path / "bad.bag"
    p.write_bytes(b"NOTABAG!" + bytes(10))
    with pytest.raises(FormatError):
        read_bag(p)
    good = tmp_path / "good.bag"
    write_sample_bag(good, n_records=1)
    data = bytearray(good.read_bytes())
    struct.pack_into("<H", data, 8, 99)   # bump version field
    p.write_bytes(bytes(data))
    with pytest.raises(FormatError):
        read_bag(p)


def reference_scan(data: bytes):
    """Oracle: minimal independent scanner counting complete records."""
    pos = 18   # header size
    n = 0
    while pos < len(data):
        tag = data[pos]
        if tag == 0x01:
            if pos + 6 > len(data):
                break
            nlen = struct.unpack_from("<H", data, pos + 4)[0]
            if pos + 6 + nlen > len(data):
                break
            pos += 6 + nlen
        elif tag == 0x02:
            # tag u8 | topic u16 | seq u32 | three u64 stamps | len u16 = 33 B
            if pos + 33 > len(data):
                break
            plen = struct.unpack_from("<H", data, pos + 31)[0]
            if pos + 33 + plen > len(data):
                break
            pos += 33 + plen
            n += 1
        elif tag == 0x03:
            break
        else:
            raise AssertionError("oracle hit an unknown tag")
    return n


def test_truncation_fuzz_matches_oracle(tmp_path):
    path = tmp_path / "full.bag"
    write_sample_bag(path, n_records=60, seed=3)
    data = path.read_bytes()
    rng = random.Random(7)
    cuts = {len(data) - 1, len(data) - 13, 18, 19, 30}
    cuts.update(rng.randrange(18, len(data)) for _ in range(200))
    for cut in sorted(cuts):
        p = tmp_path / "cut.bag"
        p.write_bytes(data[:cut])
        bag = read_bag(p)
        assert not bag.complete
        assert len(bag.records) == reference_scan(data[:cut])


def test_corrupted_trailer_crc_marks_incomplete(tmp_path):
    path = tmp_path / "crc.bag"
    write_sample_bag(path, n_records=5)
    data = bytearray(path.read_bytes())
    data[-1] ^= 0xFF
    path.write_bytes(bytes(data))
    bag = read_bag(path)
    assert not bag.complete
    assert len(bag.records) == 5   # records themselves still readable


def test_trailer_crc_is_zlib_crc32(tmp_path):
    path = tmp_path / "c.bag"
    write_sample_bag(path, n_records=3)
    data = path.read_bytes()
    stored = struct.unpack_from("<I", data, len(data) - 4)[0]
    assert stored == zlib.crc32(data[:-4])


# -- live record / play ------------------------------------------------------

def publish_burst(client, topic, kind, payloads, gap=0.0):
    client.announce(topic, kind)
    for vals in payloads:
        client.publish(topic, kind, vals)
        if gap:
            time.sleep(gap)


def test_record_play_record_identical(tmp_path, make_client):
    pub = make_client()
    rec_client = make_client()
    stop = threading.Event()
    path1 = tmp_path / "first.bag"
    t = threading.Thread(target=record, args=(rec_client, ["/biosensors/*/*"], path1),
                         kwargs={"limit": 40})
    t.start()
    time.sleep(0.2)
    publish_burst(pub, "/biosensors/polar_h10/hr", MsgKind.F32,
                  [[float(60 + i)] for i in range(20)], gap=0.005)
    publish_burst(pub, "/biosensors/empatica_e4/acc", MsgKind.F32ARRAY,
                  [[0.1 * i, 0.2 * i, 1.0] for i in range(20)], gap=0.005)
    t.join(10.0)
    assert not t.is_alive()
    bag1 = read_bag(path1)
    assert bag1.complete and len(bag1.records) == 40

    # replay into a second recorder; payload/seq/timestamps must survive
    path2 = tmp_path / "second.bag"
    rec2 = make_client()
    t2 = threading.Thread(target=record, args=(rec2, ["/biosensors/*/*"], path2),
                          kwargs={"limit": 40, "stop_event": stop})
    t2.start()
    time.sleep(0.2)
    play(path1, make_client(), rate_multiplier=20.0)
    t2.join(10.0)
    assert not t2.is_alive()
    bag2 = read_bag(path2)

    def essence(bag):
        return sorted((bag.topics[r.topic_id][0], r.seq, r.t_wall_ns,
                       r.t_mono_ns, r.payload) for r in bag.records)

    assert essence(bag2) == essence(bag1)


def test_play_rate_multiplier_timing(tmp_path, make_client):
    # bag spanning 1.0 s of monotonic time; at 4x it should take ~0.25 s
    path = tmp_path / "timed.bag"
    with BagWriter(path) as w:
        w.add_topic(1, "/biosensors/polar_h10/hr", int(MsgKind.F32))
        for i in range(11):
            t_mono = i * 100_000_000   # 0.1 s apart
            w.add_record(1, i, t_mono, t_mono, t_mono,
                         encode_payload(MsgKind.F32, [60.0]))
    player = make_client()
    t0 = time.monotonic()
    n = play(path, player, rate_multiplier=4.0)
    elapsed = time.monotonic() - t0
    assert n == 11
    assert 0.2 <= elapsed <= 0.6


def test_play_preserves_seq_on_wire(tmp_path, make_client):
    path = tmp_path / "seq.bag"
    with BagWriter(path) as w:
        w.add_topic(1, "/biosensors/polar_h10/hr", int(MsgKind.F32))
        for seq in (5, 9, 1000):
            w.add_record(1, seq, 7, 8, 9, encode_payload(MsgKind.F32, [61.0]))
    sub = make_client().subscribe("/biosensors/polar_h10/hr")
    time.sleep(0.1)
    play(path, make_client(), rate_multiplier=100.0)
    time.sleep(0.2)
    frames = sub.drain()
    assert [f.seq for f in frames] == [5, 9, 1000]
    assert all(f.t_wall_ns == 7 and f.t_mono_ns == 8 for f in frames)


def test_bag_info(tmp_path):
    path = tmp_path / "info.bag"
    write_sample_bag(path, n_records=30, seed=5)
    info = bag_info(path)
    assert info["complete"] is True
    assert info["record_count"] == 30
    assert sum(t["count"] for t in info["topics"]) == 30
    assert {t["name"] for t in info["topics"]} == {
        "/biosensors/polar_h10/hr", "/biosensors/zephyr_bioharness/ecg_chunk"}
    assert info["duration_s"] > 0
    for t in info["topics"]:
        assert t["rate_hz"] == pytest.approx(t["count"] / info["duration_s"])


def test_export_csv(tmp_path):
    path = tmp_path / "exp.bag"
    with BagWriter(path) as w:
        w.add_topic(1, "/biosensors/polar_h10/hr", int(MsgKind.F32))
        w.add_topic(2, "/biosensors/empatica_e4/tag", int(MsgKind.EMPTY))
        w.add_record(1, 0, 100, 0, 0, encode_payload(MsgKind.F32, [72.5]))
        w.add_record(1, 1, 200, 0, 0, encode_payload(MsgKind.F32, [73.5]))
        w.add_record(2, 0, 300, 0, 0, b"")
    out = export_csv(path, tmp_path / "csv")
    by_name = {p.name: p for p in out}
    hr = by_name["biosensors__polar_h10__hr.csv"].read_text().splitlines()
    assert hr[0] == "t_wall_ns,seq,values"
    assert hr[1] == "100,0,72.5"
    assert hr[2] == "200,1,73.5"
    tag = by_name["biosensors__empatica_e4__tag.csv"].read_text().splitlines()
    assert tag[1] == "300,0"


def test_record_topic_filter(tmp_path, make_client):
    pub = make_client()
    rec_client = make_client()
    path = tmp_path / "filtered.bag"
    t = threading.Thread(
        target=record, args=(rec_client, ["/biosensors/polar_h10/*"], path),
        kwargs={"limit": 5})
    t.start()
    time.sleep(0.2)
    publish_burst(pub, "/biosensors/empatica_e4/hr", MsgKind.F32,
                  [[99.0]] * 10, gap=0.002)
    publish_burst(pub, "/biosensors/polar_h10/hr", MsgKind.F32,
                  [[float(i)] for i in range(5)], gap=0.002)
    t.join(10.0)
    assert not t.is_alive()
    bag = read_bag(path)
    names = {bag.topics[r.topic_id][0] for r in bag.records}
    assert names == {"/biosensors/polar_h10/hr"}
    assert len(bag.records) == 5
