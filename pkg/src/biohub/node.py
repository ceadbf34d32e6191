"""Generalized sensor node: owns the three runtime parameters, classifies
channels into raw / chunk / hardware, aggregates raw samples into
fixed-length chunks, and publishes everything through a bus client.

Chunking is tumbling and loss-free: concatenating all published chunks for
a channel reproduces the raw sample prefix exactly. Partial chunks are
discarded on shutdown and whenever Chunk_Length changes.
"""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Iterator, Sequence

from .bus.client import BusClient, ParamCommand
from .errors import ParamError
from .framing import ParamKey, ParamStatus
from .messages import MsgKind
from .topics import TopicName

log = logging.getLogger(__name__)

DEFAULT_CHUNK_LENGTH = 128


class Category(Enum):
    RAW = "raw"
    CHUNK = "chunk"
    HARDWARE = "hardware"


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    category: Category
    msg_kind: MsgKind
    rate_hz: float = 0.0          # 0 for event-driven channels
    width: int = 1                # vector length for F32Array raw/hardware channels
    fixed_chunk: int | None = None  # device-defined chunk size, bypasses Chunk_Length

    def __post_init__(self):
        if self.category == Category.CHUNK and self.msg_kind != MsgKind.F32ARRAY:
            raise ValueError(f"chunk channel {self.name} must carry F32Array")


@dataclass(frozen=True)
class SensorSpec:
    sensor_name: str
    channels: tuple[ChannelSpec, ...]

    def __post_init__(self):
        names = {c.name for c in self.channels}
        if len(names) != len(self.channels):
            raise ValueError("duplicate channel names")
        for c in self.channels:
            if (c.category == Category.CHUNK and c.fixed_chunk is None
                    and not c.name.endswith("_chunk")):
                raise ValueError(f"accumulated chunk channel {c.name} must end in _chunk")
            # software chunks must shadow an existing raw channel
            if c.category == Category.CHUNK and c.fixed_chunk is None:
                if c.name[: -len("_chunk")] not in names:
                    raise ValueError(f"chunk channel {c.name} has no raw source")

    def channel(self, name: str) -> ChannelSpec:
        for c in self.channels:
            if c.name == name:
                return c
        raise KeyError(name)

    def topic(self, channel_name: str) -> str:
        return TopicName(self.sensor_name, channel_name).render()

    def topics(self) -> list[str]:
        return [self.topic(c.name) for c in self.channels]


@dataclass(frozen=True)
class NodeParams:
    sensor_enable: bool = True
    chunk_enable: bool = True
    chunk_length: int = DEFAULT_CHUNK_LENGTH

    def __post_init__(self):
        if self.chunk_length < 1:
            raise ValueError("chunk_length must be >= 1")


class ChunkAccumulator:
    """Tumbling buffer: emits a full list exactly when fill hits capacity."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._buf: list[float] = []

    @property
    def fill(self) -> int:
        return len(self._buf)

    def add(self, sample: float) -> list[float] | None:
        self._buf.append(sample)
        if len(self._buf) == self.capacity:
            out, self._buf = self._buf, []
            return out
        return None

    def extend(self, samples: Iterable[float]) -> list[list[float]]:
        out = []
        for s in samples:
            chunk = self.add(s)
            if chunk is not None:
                out.append(chunk)
        return out

    def reset(self):
        self._buf = []


def apply_param(params: NodeParams, key: ParamKey, value: int) -> tuple[NodeParams, bool]:
    """Returns (new params, accumulators_must_reset)."""
    if key == ParamKey.SENSOR_ENABLE:
        return replace(params, sensor_enable=bool(value)), False
    if key == ParamKey.CHUNK_ENABLE:
        return replace(params, chunk_enable=bool(value)), False
    if key == ParamKey.CHUNK_LENGTH:
        if value < 1:
            raise ParamError(f"Chunk_Length must be >= 1, got {value}")
        changed = value != params.chunk_length
        return replace(params, chunk_length=int(value)), changed
    raise ParamError(f"unknown parameter key {key}")


class SensorNode:
    """Runs one sensor: consumes (channel, value-or-sequence) events from a
    sample source and publishes them per the current parameters.

    The source yields (channel_name, payload) where payload is a float for
    F32 channels, a sequence for F32Array channels, an int for U8/U16, or
    None for Empty. Device-chunked channels receive their full arrays
    directly from the source.
    """

    def __init__(self, spec: SensorSpec, source: Iterator, client: BusClient,
                 params: NodeParams | None = None):
        self.spec = spec
        self.source = source
        self.client = client
        self.params = params or NodeParams()
        self._accs: dict[str, ChunkAccumulator] = {}
        self._chunk_of: dict[str, ChannelSpec] = {}
        for c in spec.channels:
            if c.category == Category.CHUNK and c.fixed_chunk is None:
                raw_name = c.name[: -len("_chunk")]
                self._chunk_of[raw_name] = c
        self._reset_accumulators()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def _reset_accumulators(self):
        self._accs = {
            raw: ChunkAccumulator(self.params.chunk_length) for raw in self._chunk_of
        }

    # -- parameter handling --------------------------------------------------

    def _apply_pending_params(self):
        while True:
            try:
                cmd: ParamCommand = self.client.param_commands.get_nowait()
            except queue.Empty:
                return
            if cmd.node != self.spec.sensor_name:
                continue
            try:
                self.params, reset = apply_param(self.params, cmd.key, cmd.value)
            except ParamError:
                self.client.send_param_ack(cmd, ParamStatus.PARAM_ERROR, cmd.value)
                continue
            if reset:
                self._reset_accumulators()
            applied = (self.params.chunk_length if cmd.key == ParamKey.CHUNK_LENGTH
                       else int(getattr(self.params, cmd.key.name.lower())))
            self.client.send_param_ack(cmd, ParamStatus.OK, applied)

    # -- main loop -----------------------------------------------------------

    def announce_all(self):
        for c in self.spec.channels:
            self.client.announce(self.spec.topic(c.name), c.msg_kind)

    def run(self):
        """Blocking run loop; returns when the source ends or stop() is called."""
        self.announce_all()
        for channel_name, payload in self.source:
            self._apply_pending_params()
            if self._stop.is_set():
                break
            if not self.params.sensor_enable:
                continue
            self._emit(channel_name, payload)
        # partial chunks are deliberately discarded at shutdown

    def _emit(self, channel_name: str, payload):
        try:
            chan = self.spec.channel(channel_name)
        except KeyError:
            log.warning("%s: dropping sample for unknown channel %r",
                        self.spec.sensor_name, channel_name)
            return
        topic = self.spec.topic(channel_name)
        if chan.category == Category.CHUNK:
            # device-defined chunk delivered whole by the source
            if self.params.chunk_enable:
                self.client.publish(topic, MsgKind.F32ARRAY, list(payload))
            return
        if chan.msg_kind == MsgKind.F32:
            self.client.publish(topic, MsgKind.F32, [float(payload)])
            samples: Sequence[float] = (float(payload),)
        elif chan.msg_kind == MsgKind.F32ARRAY:
            vec = [float(v) for v in payload]
            self.client.publish(topic, MsgKind.F32ARRAY, vec)
            samples = vec  # vector channels chunk sample-major, flattened
        elif chan.msg_kind in (MsgKind.U8, MsgKind.U16):
            self.client.publish(topic, chan.msg_kind, [int(payload)])
            samples = ()
        else:
            self.client.publish(topic, MsgKind.EMPTY, None)
            samples = ()
        chunk_chan = self._chunk_of.get(channel_name)
        if chunk_chan is None or not samples:
            return
        acc = self._accs[channel_name]
        for sample in samples:
            full = acc.add(sample)
            if full is not None and self.params.chunk_enable:
                self.client.publish(self.spec.topic(chunk_chan.name),
                                    MsgKind.F32ARRAY, full)

    # -- background control --------------------------------------------------

    def start(self) -> "SensorNode":
        self._thread = threading.Thread(
            target=self.run, daemon=True, name=f"node-{self.spec.sensor_name}")
        self._thread.start()
        return self

    def stop(self, join_timeout: float = 5.0):
        self._stop.set()
        stopper = getattr(self.source, "stop", None)
        if stopper:
            stopper()
        if self._thread:
            self._thread.join(join_timeout)
