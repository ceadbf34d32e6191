"""Topic broker: accepts sessions over TCP, assigns topic ids, fans data
frames out to subscribers, and routes parameter commands to sensor nodes.

Backpressure: each session has a bounded outbound queue (default 1024
frames). When a subscriber falls behind, the oldest queued frames are
dropped and counted; publishers are never blocked by slow subscribers.
"""

from __future__ import annotations

import logging
import socket
import threading
from collections import deque
from dataclasses import dataclass, field

from ..errors import IoError
from ..framing import (
    Frame, FrameKind, FrameSplitter, ParamStatus,
    decode_announce, decode_param, encode_announce, encode_frame, encode_param,
)
from ..topics import is_valid_topic, topic_matches

log = logging.getLogger(__name__)

DEFAULT_ADDR = "127.0.0.1:7653"
DEFAULT_QUEUE_DEPTH = 1024


def parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


@dataclass
class TopicEntry:
    topic_id: int
    name: str
    msg_kind: int
    publishers: set = field(default_factory=set)


class _Session:
    """One connected client: reader thread plus a bounded writer queue."""

    def __init__(self, broker: "Broker", sock: socket.socket, sid: int):
        self.broker = broker
        self.sock = sock
        self.sid = sid
        self.patterns: list[str] = []
        self.announced: set[int] = set()     # topic ids this session publishes
        self.sensor_names: set[str] = set()
        self.dropped = 0
        self._q: deque[bytes] = deque()
        self._q_lock = threading.Lock()
        self._q_ready = threading.Condition(self._q_lock)
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True,
                                        name=f"broker-session-{sid}-r")
        self._writer = threading.Thread(target=self._write_loop, daemon=True,
                                        name=f"broker-session-{sid}-w")

    def start(self):
        self._reader.start()
        self._writer.start()

    def send(self, data: bytes):
        with self._q_lock:
            if self._closed:
                return
            if len(self._q) >= self.broker.queue_depth:
                self._q.popleft()
                self.dropped += 1
                self.broker.total_dropped += 1
            self._q.append(data)
            self._q_ready.notify()

    def close(self):
        with self._q_lock:
            if self._closed:
                return
            self._closed = True
            self._q_ready.notify()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()

    def _read_loop(self):
        splitter = FrameSplitter()
        try:
            while True:
                data = self.sock.recv(65536)
                if not data:
                    break
                for frame in splitter.feed(data):
                    self.broker._handle(self, frame)
        except (OSError, Exception) as exc:
            if not self._closed:
                log.debug("session %d reader ended: %s", self.sid, exc)
        finally:
            self.broker._drop_session(self)

    def _write_loop(self):
        while True:
            with self._q_lock:
                while not self._q and not self._closed:
                    self._q_ready.wait()
                if self._closed and not self._q:
                    return
                data = self._q.popleft()
            try:
                self.sock.sendall(data)
            except OSError:
                return


class Broker:
    """Runs the bus. Use serve() (blocking) or start() (background thread)."""

    def __init__(self, addr: str = DEFAULT_ADDR, queue_depth: int = DEFAULT_QUEUE_DEPTH):
        self.addr = addr
        self.queue_depth = queue_depth
        self.total_dropped = 0
        self._lock = threading.RLock()
        self._topics_by_id: dict[int, TopicEntry] = {}
        self._topics_by_name: dict[str, TopicEntry] = {}
        self._next_topic_id = 1
        self._sessions: dict[int, _Session] = {}
        self._next_sid = 1
        self._pending_params: dict[tuple[str, int], _Session] = {}
        self._sock: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._stopping = False
        self.port: int | None = None

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> "Broker":
        host, port = parse_addr(self.addr)
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
        except OSError as exc:
            raise IoError(f"cannot bind {self.addr}: {exc}") from exc
        sock.listen(64)
        self._sock = sock
        self.port = sock.getsockname()[1]
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True,
                                               name="broker-accept")
        self._accept_thread.start()
        return self

    def serve(self):
        self.start()
        try:
            self._accept_thread.join()
        except KeyboardInterrupt:
            pass
        finally:
            self.close()

    def close(self):
        self._stopping = True
        if self._sock:
            try:
                self._sock.close()
            except OSError:
                pass
        with self._lock:
            sessions = list(self._sessions.values())
        for s in sessions:
            s.close()

    def _accept_loop(self):
        while not self._stopping:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._lock:
                sid = self._next_sid
                self._next_sid += 1
                session = _Session(self, conn, sid)
                self._sessions[sid] = session
            session.start()

    # -- introspection -------------------------------------------------------

    def topics(self) -> list[tuple[str, int, int]]:
        """Live topic registry: (name, msg_kind, active publisher count)."""
        with self._lock:
            return sorted(
                (t.name, t.msg_kind, len(t.publishers))
                for t in self._topics_by_name.values()
            )

    def drop_counts(self) -> dict[int, int]:
        with self._lock:
            return {sid: s.dropped for sid, s in self._sessions.items()}

    # -- frame handling ------------------------------------------------------

    def _handle(self, session: _Session, frame: Frame):
        if frame.kind == FrameKind.ANNOUNCE:
            self._on_announce(session, frame)
        elif frame.kind == FrameKind.SUBSCRIBE:
            self._on_subscribe(session, frame)
        elif frame.kind == FrameKind.DATA:
            self._on_data(session, frame)
        elif frame.kind == FrameKind.PARAM_SET:
            self._on_param_set(session, frame)
        elif frame.kind == FrameKind.PARAM_ACK:
            self._on_param_ack(session, frame)

    def _on_announce(self, session: _Session, frame: Frame):
        name, msg_kind, _ = decode_announce(frame)
        if not is_valid_topic(name):
            log.warning("session %d announced invalid topic %r; rejected", session.sid, name)
            session.close()
            return
        with self._lock:
            entry = self._topics_by_name.get(name)
            if entry is None:
                entry = TopicEntry(self._next_topic_id, name, msg_kind)
                self._next_topic_id += 1
                self._topics_by_name[name] = entry
                self._topics_by_id[entry.topic_id] = entry
            entry.publishers.add(session.sid)
            session.announced.add(entry.topic_id)
            session.sensor_names.add(name.split("/")[2])
            ack = encode_frame(encode_announce(
                name, entry.msg_kind, entry.topic_id, len(entry.publishers)))
            # enqueue under the lock so no subscriber can see a data frame
            # for this topic ahead of its announce
            session.send(ack)
            for s in self._sessions.values():
                if s is not session and any(topic_matches(name, p) for p in s.patterns):
                    s.send(ack)

    def _on_subscribe(self, session: _Session, frame: Frame):
        pattern = frame.payload.decode()
        with self._lock:
            session.patterns.append(pattern)
            for t in self._topics_by_name.values():
                if topic_matches(t.name, pattern):
                    session.send(encode_frame(encode_announce(
                        t.name, t.msg_kind, t.topic_id, len(t.publishers))))

    def _on_data(self, session: _Session, frame: Frame):
        with self._lock:
            entry = self._topics_by_id.get(frame.topic_id)
            if entry is None:
                return
            raw = None
            for s in self._sessions.values():
                if s is not session and any(topic_matches(entry.name, p) for p in s.patterns):
                    if raw is None:
                        raw = encode_frame(frame)
                    s.send(raw)

    def _on_param_set(self, session: _Session, frame: Frame):
        token, key, _, value, node = decode_param(frame)
        with self._lock:
            nodes = [s for s in self._sessions.values() if node in s.sensor_names]
            if nodes:
                self._pending_params[(node, token)] = session
        if not nodes:
            session.send(encode_frame(encode_param(
                FrameKind.PARAM_ACK, token, key, value, node,
                status=ParamStatus.NODE_NOT_FOUND)))
            return
        raw = encode_frame(frame)
        for s in nodes:
            s.send(raw)

    def _on_param_ack(self, session: _Session, frame: Frame):
        token, _, _, _, node = decode_param(frame)
        with self._lock:
            requester = self._pending_params.pop((node, token), None)
        if requester is not None:
            requester.send(encode_frame(frame))

    def _drop_session(self, session: _Session):
        with self._lock:
            self._sessions.pop(session.sid, None)
            for tid in session.announced:
                entry = self._topics_by_id.get(tid)
                if entry is None:
                    continue
                entry.publishers.discard(session.sid)
                if not entry.publishers:
                    self._topics_by_id.pop(tid, None)
                    self._topics_by_name.pop(entry.name, None)
        session.close()
