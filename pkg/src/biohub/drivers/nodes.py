"""Node factories: one per supported sensor, each selecting a backend.

backend options:
    sim     seeded synthetic signals (every sensor)
    lsl     LSL bridge (empatica_e4; live stream or replay file)
    device  byte-level device feed (polar_h10 BLE notifications,
            zephyr_bioharness strap frames); callers supply the feed
"""

from __future__ import annotations

from typing import Iterable

from ..bus.client import BusClient
from ..errors import BackendUnavailable
from ..node import NodeParams, SensorNode
from ..simsig import SimConfig
from . import specs
from .lsl_bridge import FileReplaySource, lsl_inlet_source
from .polar_ble import ble_notification_stream
from .strap import StrapDeframer

# column order of the empatica LSL fixture streams we replay
EMPATICA_LSL_CHANNELS = ("bvp", "gsr", "st", "hr")


def _sim_node(sensor_name: str, client: BusClient, cfg: SimConfig | None,
              params: NodeParams | None, duration_s: float | None,
              rate_overrides: dict[str, float] | None, realtime: bool) -> SensorNode:
    from .sim_backend import sim_source
    source = sim_source(sensor_name, cfg=cfg, rate_overrides=rate_overrides,
                        duration_s=duration_s, realtime=realtime)
    return SensorNode(specs.SENSOR_SPECS[sensor_name], source, client, params=params)


def _make(sensor_name, backend, client, *, cfg=None, params=None, duration_s=None,
          rate_overrides=None, realtime=True, source=None) -> SensorNode:
    if backend == "sim":
        return _sim_node(sensor_name, client, cfg, params, duration_s,
                         rate_overrides, realtime)
    if source is None:
        raise BackendUnavailable(
            f"{sensor_name}: backend {backend!r} needs an explicit source")
    return SensorNode(specs.SENSOR_SPECS[sensor_name], source, client, params=params)


def empatica_e4_node(backend: str, client: BusClient, *, cfg=None, params=None,
                     duration_s=None, rate_overrides=None, realtime=True,
                     lsl_stream: str | None = None,
                     replay_file: str | None = None) -> SensorNode:
    if backend == "lsl":
        if replay_file is not None:
            source = FileReplaySource(replay_file, channel_map=EMPATICA_LSL_CHANNELS,
                                      realtime=realtime)
            return SensorNode(specs.EMPATICA_E4, source, client, params=params)
        source = lsl_inlet_source(lsl_stream or "E4_BVP", EMPATICA_LSL_CHANNELS)
        return SensorNode(specs.EMPATICA_E4, source, client, params=params)
    return _make("empatica_e4", backend, client, cfg=cfg, params=params,
                 duration_s=duration_s, rate_overrides=rate_overrides, realtime=realtime)


def emotiv_insight_node(backend: str, client: BusClient, **kw) -> SensorNode:
    return _make("emotiv_insight", backend, client, **kw)


def shimmer3_gsr_node(backend: str, client: BusClient, **kw) -> SensorNode:
    return _make("shimmer3_gsr", backend, client, **kw)


def polar_h10_node(backend: str, client: BusClient, *,
                   notifications: Iterable[bytes] | None = None, **kw) -> SensorNode:
    if backend == "device":
        if notifications is None:
            raise BackendUnavailable("polar_h10 device backend needs a notification feed")
        source = ble_notification_stream(notifications)
        return SensorNode(specs.POLAR_H10, source, client, params=kw.get("params"))
    return _make("polar_h10", backend, client, **kw)


def vernier_belt_node(backend: str, client: BusClient, **kw) -> SensorNode:
    return _make("vernier_respiration_belt", backend, client, **kw)


def zephyr_strap_source(byte_chunks: Iterable[bytes]):
    """Decodes strap frames into zephyr node events.

    msg_id 0x10 = hr u8, 0x11 = hrv u16 LE, 0x12 = br f32-as-centi-bpm u16.
    """
    import struct
    deframer = StrapDeframer()
    for chunk in byte_chunks:
        for f in deframer.feed(chunk):
            if f.msg_id == 0x10 and len(f.payload) == 1:
                yield "hr", f.payload[0]
            elif f.msg_id == 0x11 and len(f.payload) == 2:
                yield "hrv", struct.unpack("<H", f.payload)[0]
            elif f.msg_id == 0x12 and len(f.payload) == 2:
                yield "br", struct.unpack("<H", f.payload)[0] / 100.0


def zephyr_bioharness_node(backend: str, client: BusClient, *,
                           byte_feed: Iterable[bytes] | None = None, **kw) -> SensorNode:
    if backend == "device":
        if byte_feed is None:
            raise BackendUnavailable("zephyr device backend needs a serial byte feed")
        source = zephyr_strap_source(byte_feed)
        return SensorNode(specs.ZEPHYR_BIOHARNESS, source, client, params=kw.get("params"))
    return _make("zephyr_bioharness", backend, client, **kw)


NODE_FACTORIES = {
    "empatica_e4": empatica_e4_node,
    "emotiv_insight": emotiv_insight_node,
    "shimmer3_gsr": shimmer3_gsr_node,
    "polar_h10": polar_h10_node,
    "vernier_respiration_belt": vernier_belt_node,
    "zephyr_bioharness": zephyr_bioharness_node,
}
