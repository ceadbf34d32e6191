"""Bus client: publisher/subscriber handle used by sensor nodes, the
recorder, the feature stage, and the CLI.

One BusClient owns one TCP connection. A background reader thread routes
incoming frames to subscriptions, parameter futures, and (for node
processes) the inbound parameter-command queue. A single client handle is
intended for use by one thread at a time; handles may be moved between
threads.
"""

from __future__ import annotations

import itertools
import os
import queue
import socket
import threading
import time
from dataclasses import dataclass
from typing import Sequence

from ..errors import BusTimeout, ConnectionLost, NodeNotFound, ParamError
from ..framing import (
    Frame, FrameKind, FrameSplitter, ParamKey, ParamStatus,
    decode_announce, decode_param, encode_announce, encode_frame,
    encode_param, encode_subscribe,
)
from ..messages import MsgKind, decode_payload, encode_payload
from ..topics import topic_matches
from .broker import DEFAULT_ADDR, parse_addr


def default_addr() -> str:
    return os.environ.get("BIOHUB_ADDR", DEFAULT_ADDR)


@dataclass
class TopicFrame:
    """A decoded data frame as seen by a subscriber."""
    topic: str
    kind: MsgKind
    values: tuple
    seq: int
    t_wall_ns: int
    t_mono_ns: int
    payload: bytes

    @property
    def value(self):
        return self.values[0] if self.values else None


@dataclass
class ParamCommand:
    """An inbound parameter request delivered to a node."""
    token: int
    key: ParamKey
    value: int
    node: str


class Subscription:
    """Frames for one set of patterns, in received order."""

    def __init__(self, client: "BusClient", patterns: list[str], maxsize: int = 100_000):
        self.patterns = patterns
        self._client = client
        self._q: queue.Queue = queue.Queue(maxsize=maxsize)

    def next_frame(self, timeout: float | None = None) -> TopicFrame:
        try:
            item = self._q.get(timeout=timeout)
        except queue.Empty:
            raise BusTimeout(f"no frame within {timeout}s") from None
        if item is None:
            raise ConnectionLost("bus connection closed")
        return item

    def drain(self) -> list[TopicFrame]:
        out = []
        while True:
            try:
                item = self._q.get_nowait()
            except queue.Empty:
                return out
            if item is not None:
                out.append(item)

    def __iter__(self):
        while True:
            try:
                yield self.next_frame()
            except ConnectionLost:
                return

    def _offer(self, frame: TopicFrame | None):
        try:
            self._q.put_nowait(frame)
        except queue.Full:
            pass


class BusClient:
    def __init__(self, addr: str | None = None, connect_timeout: float = 5.0):
        self.addr = addr or default_addr()
        host, port = parse_addr(self.addr)
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as exc:
            raise ConnectionLost(f"cannot reach broker at {self.addr}: {exc}") from exc
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._send_lock = threading.Lock()
        self._topics_by_id: dict[int, tuple[str, int]] = {}
        self._ids_by_name: dict[str, int] = {}
        self._pub_counts: dict[str, int] = {}
        self._announce_waits: dict[str, threading.Event] = {}
        self._seq = {}
        self._subs: list[Subscription] = []
        self._subs_lock = threading.Lock()
        self._param_futures: dict[int, tuple[threading.Event, list]] = {}
        self._token_iter = itertools.count(1)
        self.param_commands: queue.Queue[ParamCommand] = queue.Queue()
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True,
                                        name="bus-client-reader")
        self._reader.start()

    # -- publishing ----------------------------------------------------------

    def announce(self, topic: str, kind: MsgKind, timeout: float = 5.0) -> int:
        """Register a topic for publishing; returns the broker-assigned id."""
        with self._subs_lock:
            existing = self._ids_by_name.get(topic)
            if existing is not None:
                return existing
            ev = self._announce_waits.setdefault(topic, threading.Event())
        self._send(encode_frame(encode_announce(topic, kind)))
        if not ev.wait(timeout):
            raise BusTimeout(f"no topic id assigned for {topic} within {timeout}s")
        return self._ids_by_name[topic]

    def publish(self, topic: str, kind: MsgKind, values: Sequence[float] | None = None):
        tid = self._ids_by_name.get(topic)
        if tid is None:
            raise ConnectionLost(f"topic {topic} not announced")
        seq = self._seq.get(topic, 0) + 1
        self._seq[topic] = seq
        frame = Frame(
            FrameKind.DATA, topic_id=tid, seq=seq,
            t_wall_ns=time.time_ns(), t_mono_ns=time.monotonic_ns(),
            msg_kind=kind, payload=encode_payload(kind, values),
        )
        self._send(encode_frame(frame))

    def publish_raw(self, topic: str, kind: int, payload: bytes,
                    seq: int, t_wall_ns: int, t_mono_ns: int):
        """Publish with caller-supplied seq/timestamps (bag replay)."""
        tid = self._ids_by_name.get(topic)
        if tid is None:
            raise ConnectionLost(f"topic {topic} not announced")
        frame = Frame(FrameKind.DATA, topic_id=tid, seq=seq, t_wall_ns=t_wall_ns,
                      t_mono_ns=t_mono_ns, msg_kind=kind, payload=payload)
        self._send(encode_frame(frame))

    # -- subscribing ---------------------------------------------------------

    def subscribe(self, patterns: str | Sequence[str], maxsize: int = 100_000) -> Subscription:
        if isinstance(patterns, str):
            patterns = [patterns]
        sub = Subscription(self, list(patterns), maxsize=maxsize)
        with self._subs_lock:
            self._subs.append(sub)
        for p in patterns:
            self._send(encode_frame(encode_subscribe(p)))
        return sub

    def known_topics(self) -> list[tuple[str, int, int]]:
        """(name, msg_kind, publisher count) learned from announces so far."""
        with self._subs_lock:
            return sorted(
                (name, kind, self._pub_counts.get(name, 0))
                for name, kind in self._topics_by_id.values()
            )

    # -- parameters ----------------------------------------------------------

    def set_param(self, node: str, key: ParamKey | str, value, timeout: float = 5.0) -> int:
        """Set a node parameter; returns the applied value from the ack."""
        if isinstance(key, str):
            from ..framing import PARAM_KEYS_BY_NAME
            try:
                key = PARAM_KEYS_BY_NAME[key]
            except KeyError:
                raise ParamError(f"unknown parameter key {key!r}") from None
        if key == ParamKey.CHUNK_LENGTH:
            ivalue = int(value)
            if ivalue < 1:
                raise ParamError(f"Chunk_Length must be >= 1, got {ivalue}")
        else:
            if not isinstance(value, (bool, int)) or int(value) not in (0, 1):
                raise ParamError(f"{key.name} takes a boolean, got {value!r}")
            ivalue = int(value)
        token = next(self._token_iter)
        ev = threading.Event()
        result: list = []
        self._param_futures[token] = (ev, result)
        self._send(encode_frame(encode_param(FrameKind.PARAM_SET, token, key, ivalue, node)))
        if not ev.wait(timeout):
            self._param_futures.pop(token, None)
            raise BusTimeout(f"no param ack from {node} within {timeout}s")
        status, applied = result
        if status == ParamStatus.NODE_NOT_FOUND:
            raise NodeNotFound(f"no connected node named {node!r}")
        if status == ParamStatus.PARAM_ERROR:
            raise ParamError(f"node {node} rejected {key.name}={value}")
        return applied

    def send_param_ack(self, cmd: ParamCommand, status: ParamStatus, applied: int):
        self._send(encode_frame(encode_param(
            FrameKind.PARAM_ACK, cmd.token, cmd.key, applied, cmd.node, status=status)))

    # -- plumbing ------------------------------------------------------------

    def _send(self, data: bytes):
        with self._send_lock:
            try:
                self._sock.sendall(data)
            except OSError as exc:
                raise ConnectionLost(str(exc)) from exc

    def _read_loop(self):
        splitter = FrameSplitter()
        try:
            while True:
                data = self._sock.recv(65536)
                if not data:
                    break
                for frame in splitter.feed(data):
                    self._route(frame)
        except OSError:
            pass
        finally:
            self._closed = True
            with self._subs_lock:
                for sub in self._subs:
                    sub._offer(None)

    def _route(self, frame: Frame):
        if frame.kind == FrameKind.ANNOUNCE:
            name, kind, pub_count = decode_announce(frame)
            with self._subs_lock:
                self._topics_by_id[frame.topic_id] = (name, kind)
                self._ids_by_name[name] = frame.topic_id
                self._pub_counts[name] = pub_count
                ev = self._announce_waits.get(name)
            if ev:
                ev.set()
        elif frame.kind == FrameKind.DATA:
            info = self._topics_by_id.get(frame.topic_id)
            if info is None:
                return
            name, _ = info
            tf = TopicFrame(
                topic=name, kind=MsgKind(frame.msg_kind),
                values=decode_payload(frame.msg_kind, frame.payload),
                seq=frame.seq, t_wall_ns=frame.t_wall_ns, t_mono_ns=frame.t_mono_ns,
                payload=frame.payload,
            )
            with self._subs_lock:
                subs = [s for s in self._subs
                        if any(topic_matches(name, p) for p in s.patterns)]
            for s in subs:
                s._offer(tf)
        elif frame.kind == FrameKind.PARAM_ACK:
            token, _, status, value, _ = decode_param(frame)
            fut = self._param_futures.pop(token, None)
            if fut:
                ev, result = fut
                result.extend([status, value])
                ev.set()
        elif frame.kind == FrameKind.PARAM_SET:
            token, key, _, value, node = decode_param(frame)
            try:
                self.param_commands.put_nowait(
                    ParamCommand(token=token, key=ParamKey(key), value=value, node=node))
            except (ValueError, queue.Full):
                pass

    def close(self):
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
