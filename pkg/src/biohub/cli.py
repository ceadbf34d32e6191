"""The biohub command: broker, drivers, introspection, recording, replay,
parameters, feature extraction, and CSV export.

Exit codes: 0 success, 2 broker unreachable, 64 usage error, 65 bad
data/format.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import threading
import time

from . import bag as bagmod
from .bus.broker import Broker
from .bus.client import BusClient, default_addr
from .errors import (
    BiohubError, BusTimeout, ConnectionLost, FormatError, IoError,
    NodeNotFound, ParamError,
)
from .framing import PARAM_KEYS_BY_NAME

EXIT_OK = 0
EXIT_CONN = 2
EXIT_USAGE = 64
EXIT_DATA = 65


def _client(args) -> BusClient:
    try:
        return BusClient(args.addr)
    except ConnectionLost as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(EXIT_CONN)


def cmd_broker(args) -> int:
    broker = Broker(args.addr, queue_depth=args.queue_depth)
    try:
        broker.start()
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONN
    print(f"broker listening on {broker.addr}")
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        broker.close()
    return EXIT_OK


def cmd_run(args) -> int:
    from .drivers.nodes import NODE_FACTORIES
    from .simsig import SimConfig

    factory = NODE_FACTORIES.get(args.sensor)
    if factory is None:
        print(f"error: unknown sensor {args.sensor!r}; choose from "
              f"{', '.join(sorted(NODE_FACTORIES))}", file=sys.stderr)
        return EXIT_USAGE
    overrides = {}
    for item in args.rate_override or []:
        ch, _, hz = item.partition("=")
        if not hz:
            print(f"error: bad --rate-override {item!r}, expected ch=hz", file=sys.stderr)
            return EXIT_USAGE
        overrides[ch] = float(hz)
    client = _client(args)
    kwargs = dict(cfg=SimConfig(seed=args.seed), duration_s=args.duration,
                  rate_overrides=overrides or None)
    if args.backend == "lsl" and args.replay_file:
        kwargs = dict(replay_file=args.replay_file)
    try:
        node = factory(args.backend, client, **kwargs)
    except BiohubError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        node.run()
    except KeyboardInterrupt:
        pass
    finally:
        client.close()
    return EXIT_OK


def cmd_topics(args) -> int:
    client = _client(args)
    client.subscribe("/biosensors/*/*")
    client.subscribe("/biosensors/*/features/*")
    time.sleep(args.wait)
    topics = client.known_topics()
    client.close()
    if args.json:
        print(json.dumps([
            {"topic": name, "kind": kind, "publishers": pubs}
            for name, kind, pubs in topics
        ]))
    else:
        for name, kind, pubs in topics:
            print(f"{name}\tkind={kind}\tpublishers={pubs}")
    return EXIT_OK


def cmd_echo(args) -> int:
    client = _client(args)
    sub = client.subscribe(args.topic)
    seen = 0
    try:
        while args.count == 0 or seen < args.count:
            try:
                frame = sub.next_frame(timeout=args.timeout)
            except BusTimeout:
                print(f"error: no frame within {args.timeout}s", file=sys.stderr)
                return EXIT_CONN
            except ConnectionLost:
                return EXIT_CONN
            if args.json:
                print(json.dumps({
                    "topic": frame.topic, "t_wall_ns": frame.t_wall_ns,
                    "seq": frame.seq, "values": list(frame.values),
                }))
            else:
                vals = " ".join(f"{v:g}" if isinstance(v, float) else str(v)
                                for v in frame.values)
                print(f"{frame.t_wall_ns} {frame.seq} {vals}".rstrip())
            seen += 1
    except KeyboardInterrupt:
        pass
    finally:
        client.close()
    return EXIT_OK


def cmd_param(args) -> int:
    if args.key not in PARAM_KEYS_BY_NAME:
        print(f"error: unknown key {args.key!r}; choose from "
              f"{', '.join(PARAM_KEYS_BY_NAME)}", file=sys.stderr)
        return EXIT_USAGE
    raw = args.value.lower()
    if raw in ("true", "false"):
        value = raw == "true"
    else:
        try:
            value = int(raw)
        except ValueError:
            print(f"error: bad value {args.value!r}", file=sys.stderr)
            return EXIT_USAGE
    client = _client(args)
    try:
        applied = client.set_param(args.node, args.key, value)
    except NodeNotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ParamError, BusTimeout) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    finally:
        client.close()
    if args.json:
        print(json.dumps({"node": args.node, "key": args.key, "applied": applied}))
    else:
        print(f"ack: {args.node} {args.key} = {applied}")
    return EXIT_OK


def cmd_record(args) -> int:
    client = _client(args)
    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    patterns = args.topics or ["/biosensors/*/*"]
    count = bagmod.record(client, patterns, args.output, limit=args.limit,
                          duration_s=args.duration, stop_event=stop)
    client.close()
    print(f"recorded {count} frames to {args.output}")
    return EXIT_OK


def cmd_play(args) -> int:
    client = _client(args)
    try:
        count = bagmod.play(args.bag, client, rate_multiplier=args.rate)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    finally:
        client.close()
    print(f"replayed {count} frames from {args.bag}")
    return EXIT_OK


def cmd_info(args) -> int:
    try:
        info = bagmod.bag_info(args.bag)
    except (FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if args.json:
        print(json.dumps(info))
    else:
        print(f"{info['path']}: {info['record_count']} records, "
              f"{info['duration_s']:.3f}s"
              + ("" if info["complete"] else " (truncated)"))
        for t in info["topics"]:
            print(f"  {t['name']}\t{t['kind']}\t{t['count']} msgs\t{t['rate_hz']:.2f} Hz")
    return EXIT_OK


def cmd_export(args) -> int:
    try:
        written = bagmod.export_csv(args.bag, args.csv)
    except (FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for p in written:
        print(p)
    return EXIT_OK


def cmd_features(args) -> int:
    from .features import FeatureNode, load_jobs
    from .errors import ConfigError

    try:
        jobs = load_jobs(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    client = _client(args)
    node = FeatureNode(client, jobs).start()
    print(f"feature node running: {len(jobs)} jobs")
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        node.stop()
        client.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biohub",
                                description="wearable biosensor streaming middleware")
    p.add_argument("--addr", default=default_addr(),
                   help="broker address host:port (env BIOHUB_ADDR)")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("broker", help="run the pub/sub broker")
    b.add_argument("--queue-depth", type=int, default=1024)
    b.set_defaults(func=cmd_broker)

    r = sub.add_parser("run", help="run a sensor driver node")
    r.add_argument("sensor")
    r.add_argument("--backend", choices=["sim", "device", "lsl"], default="sim")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--duration", type=float, default=None, help="seconds (sim)")
    r.add_argument("--rate-override", action="append", metavar="CH=HZ")
    r.add_argument("--replay-file", help="LSL fixture file for the lsl backend")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("topics", help="list live topics")
    t.add_argument("--json", action="store_true")
    t.add_argument("--wait", type=float, default=0.4,
                   help="seconds to gather announcements")
    t.set_defaults(func=cmd_topics)

    e = sub.add_parser("echo", help="print frames from a topic")
    e.add_argument("topic")
    e.add_argument("-n", "--count", type=int, default=0, help="0 = forever")
    e.add_argument("--timeout", type=float, default=10.0)
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_echo)

    pa = sub.add_parser("param", help="get/set node parameters")
    pa_sub = pa.add_subparsers(dest="param_cmd", required=True)
    ps = pa_sub.add_parser("set")
    ps.add_argument("node")
    ps.add_argument("key")
    ps.add_argument("value")
    ps.add_argument("--json", action="store_true")
    ps.set_defaults(func=cmd_param)

    rec = sub.add_parser("record", help="record topics into a bag file")
    rec.add_argument("-o", "--output", required=True)
    rec.add_argument("topics", nargs="*")
    rec.add_argument("--limit", type=int, default=None, help="stop after N frames")
    rec.add_argument("--duration", type=float, default=None, help="stop after N seconds")
    rec.set_defaults(func=cmd_record)

    pl = sub.add_parser("play", help="replay a bag file onto the bus")
    pl.add_argument("bag")
    pl.add_argument("--rate", type=float, default=1.0)
    pl.set_defaults(func=cmd_play)

    i = sub.add_parser("info", help="summarize a bag file")
    i.add_argument("bag")
    i.add_argument("--json", action="store_true")
    i.set_defaults(func=cmd_info)

    ex = sub.add_parser("export", help="export a bag to CSV, one file per topic")
    ex.add_argument("bag")
    ex.add_argument("--csv", required=True, metavar="DIR")
    ex.set_defaults(func=cmd_export)

    f = sub.add_parser("features", help="run the feature-extraction node")
    f.add_argument("--config", required=True)
    f.set_defaults(func=cmd_features)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; remap to our usage code
        if exc.code not in (0, None):
            sys.exit(EXIT_USAGE)
        raise
    code = args.func(args)
    sys.exit(code)


if __name__ == "__main__":
    main()
