"""Simulated sample sources: paced, seeded streams for every driver.

A PacedSource multiplexes several channel streams on one thread-friendly
iterator, scheduling each against the monotonic clock so observed rates
track nominal rates to well under 1%.
"""

from __future__ import annotations

import heapq
import itertools
import threading
import time
from typing import Iterable, Iterator

import numpy as np

from .. import simsig
from ..simsig import SimConfig
from . import specs

# how much signal to pre-generate before cycling; long enough for any
# acceptance run, bounded memory
PREGEN_SECONDS = 90.0


class PacedSource:
    """Yields (channel, payload) events at each stream's own cadence.

    streams: list of (channel_name, item_iterator) where the iterator
    yields (payload, gap_seconds) pairs. Runs until duration_s elapses
    (if given), a stream ends, or stop() is called.
    """

    def __init__(self, streams, duration_s: float | None = None, realtime: bool = True):
        self.streams = streams
        self.duration_s = duration_s
        self.realtime = realtime
        self._stop = threading.Event()

    def stop(self):
        self._stop.set()

    def __iter__(self) -> Iterator[tuple[str, object]]:
        start = time.monotonic()
        heap = []
        for i, (name, it) in enumerate(self.streams):
            it = iter(it)
            try:
                payload, gap = next(it)
            except StopIteration:
                continue
            heapq.heappush(heap, (start + gap, i, name, payload, it))
        while heap and not self._stop.is_set():
            due, i, name, payload, it = heapq.heappop(heap)
            if self.duration_s is not None and due - start > self.duration_s:
                continue
            if self.realtime:
                delay = due - time.monotonic()
                if delay > 0:
                    if self._stop.wait(delay):
                        return
            yield name, payload
            try:
                nxt, gap = next(it)
            except StopIteration:
                continue
            heapq.heappush(heap, (due + gap, i, name, nxt, it))


def _fixed_rate(values: Iterable, rate_hz: float):
    """Cycle values forever at a fixed period."""
    period = 1.0 / rate_hz
    return ((v, period) for v in itertools.cycle(values))


def _chunked(samples: np.ndarray, size: int, msg_rate_hz: float):
    usable = (len(samples) // size) * size
    chunks = [samples[i:i + size].tolist() for i in range(0, usable, size)]
    return _fixed_rate(chunks, msg_rate_hz)


def _event_stream(values: Iterable, gaps: Iterable[float]):
    return zip(itertools.cycle(values), itertools.cycle(gaps))


def _n(rate_hz: float) -> int:
    return max(int(rate_hz * PREGEN_SECONDS), 8)


def empatica_e4_streams(cfg: SimConfig, rates: dict[str, float]) -> list:
    rng = np.random.default_rng([cfg.seed, 101])
    bvp_hz, gsr_hz, st_hz = rates["bvp"], rates["gsr"], rates["st"]
    acc_hz, hr_hz, bat_hz = rates["acc"], rates["hr"], rates["bat"]
    st = 33.5 + 0.4 * np.sin(2 * np.pi * 0.002 * np.arange(_n(st_hz)) / st_hz) \
        + rng.normal(0, 0.02, _n(st_hz))
    acc_n = _n(acc_hz)
    acc = np.stack([
        0.1 * rng.standard_normal(acc_n),
        0.1 * rng.standard_normal(acc_n),
        1.0 + 0.05 * rng.standard_normal(acc_n),
    ], axis=1)
    bat = np.clip(np.linspace(98.0, 96.0, _n(bat_hz)) + rng.normal(0, 0.05, _n(bat_hz)),
                  0.0, 100.0)
    ibi = simsig.gen_ibi_series(cfg, 256)
    return [
        ("bvp", _fixed_rate(simsig.gen_ppg(cfg, bvp_hz, _n(bvp_hz)).tolist(), bvp_hz)),
        ("gsr", _fixed_rate(simsig.gen_gsr(cfg, gsr_hz, _n(gsr_hz)).tolist(), gsr_hz)),
        ("st", _fixed_rate(st.tolist(), st_hz)),
        ("hr", _fixed_rate(simsig.gen_hr_series(cfg, hr_hz, _n(hr_hz)).tolist(), hr_hz)),
        ("ibi", _event_stream(ibi.tolist(), ibi.tolist())),
        ("acc", _fixed_rate([row.tolist() for row in acc], acc_hz)),
        ("bat", _fixed_rate(bat.tolist(), bat_hz)),
        ("tag", _event_stream([None], rng.exponential(7.0, 64).tolist())),
    ]


def emotiv_insight_streams(cfg: SimConfig, rates: dict[str, float]) -> list:
    rng = np.random.default_rng([cfg.seed, 103])
    eeg_hz, pow_hz, met_hz = rates["eeg"], rates["pow"], rates["met"]
    mot_hz, dev_hz = rates["mot"], rates["dev"]
    nch = len(specs.EMOTIV_EEG_CHANNELS)
    eeg = simsig.gen_eeg(cfg, eeg_hz, nch, _n(eeg_hz))
    n_pow = _n(pow_hz)
    band_base = np.square(np.array(cfg.eeg_band_amps_uV)) / 2.0
    pow_rows = np.abs(
        np.tile(band_base.repeat(nch), (n_pow, 1))
        * (1.0 + 0.1 * rng.standard_normal((n_pow, len(band_base) * nch))))
    n_met = _n(met_hz)
    met = np.clip(0.5 + np.cumsum(rng.normal(0, 0.01, (n_met, 6)), axis=0), 0.05, 0.95)
    n_mot = _n(mot_hz)
    mot = np.concatenate([
        rng.normal(0, 0.05, (n_mot, 3)) + [0, 0, 1.0],   # accel, g units
        rng.normal(0, 1.0, (n_mot, 3)),                  # gyro dps
        rng.normal(0, 2.0, (n_mot, 3)) + [20, 0, 40],    # magnetometer uT
    ], axis=1)
    n_dev = _n(dev_hz)
    dev = np.column_stack([
        np.linspace(88.0, 86.0, n_dev),
        *[np.full(n_dev, 4.0) for _ in range(nch)],
    ])
    return [
        ("eeg", _fixed_rate([row.tolist() for row in eeg], eeg_hz)),
        ("pow", _fixed_rate([row.tolist() for row in pow_rows], pow_hz)),
        ("met", _fixed_rate([row.tolist() for row in met], met_hz)),
        ("mot", _fixed_rate([row.tolist() for row in mot], mot_hz)),
        ("dev", _fixed_rate([row.tolist() for row in dev], dev_hz)),
    ]


def shimmer3_gsr_streams(cfg: SimConfig, rates: dict[str, float]) -> list:
    gsr_hz, ppg_hz = rates["gsr"], rates["ppg"]
    return [
        ("gsr", _fixed_rate(simsig.gen_gsr(cfg, gsr_hz, _n(gsr_hz)).tolist(), gsr_hz)),
        ("ppg", _fixed_rate(simsig.gen_ppg(cfg, ppg_hz, _n(ppg_hz)).tolist(), ppg_hz)),
    ]


def polar_h10_streams(cfg: SimConfig, rates: dict[str, float]) -> list:
    hr_hz = rates["hr"]
    return [
        ("hr", _fixed_rate(simsig.gen_hr_series(cfg, hr_hz, _n(hr_hz)).tolist(), hr_hz)),
    ]


def vernier_belt_streams(cfg: SimConfig, rates: dict[str, float]) -> list:
    rng = np.random.default_rng([cfg.seed, 107])
    bpm_hz, force_hz = rates["bpm"], rates["force"]
    n_bpm = _n(bpm_hz)
    bpm = cfg.breath_rate_bpm + 0.5 * np.sin(2 * np.pi * 0.01 * np.arange(n_bpm) / bpm_hz) \
        + rng.normal(0, 0.1, n_bpm)
    return [
        ("bpm", _fixed_rate(bpm.tolist(), bpm_hz)),
        ("force", _fixed_rate(
            simsig.gen_respiration_force(cfg, force_hz, _n(force_hz)).tolist(), force_hz)),
    ]


def zephyr_bioharness_streams(cfg: SimConfig, rates: dict[str, float]) -> list:
    rng = np.random.default_rng([cfg.seed, 109])
    hr_hz, hrv_hz, br_hz = rates["hr"], rates["hrv"], rates["br"]
    hr = np.clip(np.rint(simsig.gen_hr_series(cfg, hr_hz, _n(hr_hz))), 0, 255)
    hrv = np.clip(np.rint(45.0 + 10.0 * rng.standard_normal(_n(hrv_hz))), 5, 300)
    n_br = _n(br_hz)
    br = cfg.breath_rate_bpm + 0.4 * np.sin(2 * np.pi * 0.01 * np.arange(n_br) / br_hz)
    ecg_msg_hz = specs.ZEPHYR_ECG_RATE_HZ / specs.ZEPHYR_ECG_SAMPLES_PER_MSG
    ecg = simsig.gen_ecg(cfg, specs.ZEPHYR_ECG_RATE_HZ,
                         _n(specs.ZEPHYR_ECG_RATE_HZ))
    br_sample_hz = specs.ZEPHYR_BR_MSG_RATE_HZ * specs.ZEPHYR_BR_SAMPLES_PER_MSG
    t = np.arange(_n(br_sample_hz)) / br_sample_hz
    br_wave = 0.5 + 0.45 * np.sin(2 * np.pi * cfg.breath_rate_bpm / 60.0 * t)
    return [
        ("hr", _fixed_rate([int(v) for v in hr], hr_hz)),
        ("hrv", _fixed_rate([int(v) for v in hrv], hrv_hz)),
        ("br", _fixed_rate(br.tolist(), br_hz)),
        ("ecg_chunk", _chunked(ecg, specs.ZEPHYR_ECG_SAMPLES_PER_MSG, ecg_msg_hz)),
        ("br_chunk", _chunked(br_wave, specs.ZEPHYR_BR_SAMPLES_PER_MSG,
                              specs.ZEPHYR_BR_MSG_RATE_HZ)),
    ]


_STREAM_BUILDERS = {
    "empatica_e4": empatica_e4_streams,
    "emotiv_insight": emotiv_insight_streams,
    "shimmer3_gsr": shimmer3_gsr_streams,
    "polar_h10": polar_h10_streams,
    "vernier_respiration_belt": vernier_belt_streams,
    "zephyr_bioharness": zephyr_bioharness_streams,
}


def sim_source(sensor_name: str, cfg: SimConfig | None = None,
               rate_overrides: dict[str, float] | None = None,
               duration_s: float | None = None, realtime: bool = True) -> PacedSource:
    """Build the simulated sample source for one sensor."""
    cfg = cfg or SimConfig()
    spec = specs.SENSOR_SPECS[sensor_name]
    rates = {c.name: c.rate_hz for c in spec.channels if c.rate_hz > 0}
    if rate_overrides:
        rates.update(rate_overrides)
    streams = _STREAM_BUILDERS[sensor_name](cfg, rates)
    return PacedSource(streams, duration_s=duration_s, realtime=realtime)
