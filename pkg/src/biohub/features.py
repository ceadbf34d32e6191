"""Windowed physiological features computed from chunk and event topics,
republished under /biosensors/<sensor>/features/<name>.

All feature functions are pure; the FeatureNode provides the bus plumbing
and windowing around them.
"""

from __future__ import annotations

import configparser
import logging
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bus.client import BusClient
from .errors import BusTimeout, ConfigError, ConnectionLost, InsufficientData
from .messages import MsgKind
from .simsig import EEG_BANDS
from .topics import TopicName

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Window:
    samples: np.ndarray
    rate_hz: float

    @property
    def span_s(self) -> float:
        return len(self.samples) / self.rate_hz


# -- HRV features over inter-beat-interval series ----------------------------

def mean_hr_from_ibi(ibi_seconds: Sequence[float]) -> float:
    """Mean heart rate in bpm: 60 / mean interval."""
    ibi = np.asarray(ibi_seconds, dtype=float)
    if ibi.size == 0:
        raise InsufficientData("no intervals")
    if np.any(ibi <= 0):
        raise InsufficientData("non-positive interval")
    return 60.0 / float(np.mean(ibi))


def sdnn(ibi_seconds: Sequence[float]) -> float:
    """Population standard deviation of the intervals, in milliseconds."""
    ibi = np.asarray(ibi_seconds, dtype=float)
    if ibi.size < 2:
        raise InsufficientData("sdnn needs at least 2 intervals")
    return float(np.std(ibi)) * 1000.0


def rmssd(ibi_seconds: Sequence[float]) -> float:
    """Root mean square of successive interval differences, milliseconds."""
    ibi = np.asarray(ibi_seconds, dtype=float)
    if ibi.size < 3:
        raise InsufficientData("rmssd needs at least 3 intervals")
    diffs = np.diff(ibi)
    return float(np.sqrt(np.mean(np.square(diffs)))) * 1000.0


# -- respiration -------------------------------------------------------------

def breath_rate(window: Window) -> float:
    """Breaths per minute: dominant periodogram frequency of the detrended
    force trace, sanity-checked against the zero-crossing count."""
    x = np.asarray(window.samples, dtype=float)
    if window.span_s < 20.0:
        raise InsufficientData(f"need >= 20 s of signal, got {window.span_s:.1f}")
    if float(np.var(x)) < 1e-6:
        raise InsufficientData("flat signal")
    t = np.arange(x.size) / window.rate_hz
    x = x - np.polyval(np.polyfit(t, x, 1), t)

    spec = np.abs(np.fft.rfft(x * np.hanning(x.size))) ** 2
    freqs = np.fft.rfftfreq(x.size, 1.0 / window.rate_hz)
    band = (freqs >= 0.05) & (freqs <= 2.0)
    if not np.any(band):
        raise InsufficientData("window too short to resolve breathing band")
    f_peak = freqs[band][int(np.argmax(spec[band]))]

    crossings = int(np.count_nonzero(np.diff(np.signbit(x))))
    f_zc = crossings / (2.0 * window.span_s)
    if f_zc > 0 and abs(f_peak - f_zc) > 0.5 * max(f_peak, f_zc):
        log.debug("breath_rate cross-check disagreement: periodogram %.3f Hz, "
                  "zero-crossing %.3f Hz", f_peak, f_zc)
    return float(f_peak * 60.0)


# -- EEG band power ----------------------------------------------------------

DEFAULT_BANDS = tuple((lo, hi) for _, lo, hi in EEG_BANDS)
BAND_NAMES = tuple(name for name, _, _ in EEG_BANDS)


def band_power(window: Window, bands: Sequence[tuple[float, float]] = DEFAULT_BANDS
               ) -> np.ndarray:
    """Mean squared spectral magnitude per band, Hann-windowed.

    Scaled so the sum over any set of disjoint bands never exceeds the
    signal's mean square power. Ordered as the `bands` argument (default
    theta, alpha, low beta, high beta, gamma).
    """
    x = np.asarray(window.samples, dtype=float)
    nyquist = window.rate_hz / 2.0
    for lo, hi in bands:
        if hi > nyquist:
            raise ConfigError(f"band {lo}-{hi} Hz exceeds Nyquist {nyquist:.1f} Hz")
        if not 0 <= lo < hi:
            raise ConfigError(f"bad band edges {lo}-{hi}")
    n = x.size
    spec = np.abs(np.fft.rfft(x * np.hanning(n))) ** 2
    freqs = np.fft.rfftfreq(n, 1.0 / window.rate_hz)
    # doubling interior bins makes this the full-spectrum energy; dividing
    # by n^2 keeps sum-over-all-bins == mean square of the windowed signal
    weights = np.full(n // 2 + 1, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    scaled = spec * weights / float(n) ** 2
    out = np.zeros(len(bands))
    for i, (lo, hi) in enumerate(bands):
        mask = (freqs >= lo) & (freqs < hi)
        if np.any(mask):
            out[i] = float(np.mean(scaled[mask]))
    return out


# -- feature node ------------------------------------------------------------

@dataclass(frozen=True)
class FeatureJob:
    input_topic: str
    feature: str              # sdnn | rmssd | mean_hr | breath_rate | band_power
    output_name: str
    rate_hz: float = 0.0      # sample rate of the input; 0 for IBI event series
    window_s: float = 30.0
    overlap: float = 0.5
    channels: int = 1         # for band_power over flattened multi-channel chunks

    def output_topic(self) -> str:
        sensor = TopicName.parse(self.input_topic).sensor
        return TopicName(sensor, self.output_name, feature=True).render()


_SCALAR_FEATURES = {"sdnn": sdnn, "rmssd": rmssd, "mean_hr": mean_hr_from_ibi}


def compute_job(job: FeatureJob, samples: np.ndarray):
    if job.feature in _SCALAR_FEATURES:
        return _SCALAR_FEATURES[job.feature](samples)
    if job.feature == "breath_rate":
        return breath_rate(Window(samples, job.rate_hz))
    if job.feature == "band_power":
        if job.channels > 1:
            per_ch = samples.reshape(-1, job.channels)
            powers = [band_power(Window(per_ch[:, c], job.rate_hz))
                      for c in range(job.channels)]
            return np.mean(powers, axis=0)
        return band_power(Window(samples, job.rate_hz))
    raise ConfigError(f"unknown feature {job.feature!r}")


class FeatureNode:
    """Subscribes to each job's input topic, maintains rolling windows, and
    publishes one feature value per completed window.

    IBI-style features window by accumulated interval time; sampled
    features window by sample count.
    """

    def __init__(self, client: BusClient, jobs: Sequence[FeatureJob]):
        self.client = client
        self.jobs = list(jobs)
        self._buffers: dict[int, list[float]] = {i: [] for i in range(len(self.jobs))}
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        for job in self.jobs:
            kind = MsgKind.F32ARRAY if job.feature == "band_power" else MsgKind.F32
            client.announce(job.output_topic(), kind)

    def _window_done(self, job: FeatureJob, buf: list[float]) -> bool:
        if job.rate_hz > 0:
            return len(buf) >= int(job.window_s * job.rate_hz)
        return sum(buf) >= job.window_s

    def _advance(self, job: FeatureJob, buf: list[float]) -> list[float]:
        keep = job.overlap
        if job.rate_hz > 0:
            n = int(job.window_s * job.rate_hz)
            return buf[int(n * (1 - keep)):]
        total, acc, idx = sum(buf), 0.0, 0
        for idx, v in enumerate(buf):
            acc += v
            if acc >= total * (1 - keep):
                break
        return buf[idx + 1:]

    def _run_job(self, idx: int):
        job = self.jobs[idx]
        sub = self.client.subscribe(job.input_topic)
        buf = self._buffers[idx]
        out_topic = job.output_topic()
        kind = MsgKind.F32ARRAY if job.feature == "band_power" else MsgKind.F32
        while not self._stop.is_set():
            try:
                frame = sub.next_frame(timeout=0.2)
            except BusTimeout:
                continue
            except ConnectionLost:
                return
            buf.extend(frame.values)
            if not self._window_done(job, buf):
                continue
            window = np.asarray(buf[:len(buf)], dtype=float)
            try:
                result = compute_job(job, window)
            except InsufficientData:
                result = None
            if result is not None:
                if kind == MsgKind.F32ARRAY:
                    self.client.publish(out_topic, kind, [float(v) for v in result])
                else:
                    self.client.publish(out_topic, kind, [float(result)])
            self._buffers[idx] = buf = self._advance(job, buf)

    def start(self) -> "FeatureNode":
        for i in range(len(self.jobs)):
            t = threading.Thread(target=self._run_job, args=(i,), daemon=True,
                                 name=f"feature-{self.jobs[i].output_name}")
            t.start()
            self._threads.append(t)
        return self

    def stop(self):
        self._stop.set()
        for t in self._threads:
            t.join(2.0)


def load_jobs(path: str) -> list[FeatureJob]:
    """Parse an INI feature config: one section per job.

    [hrv_sdnn]
    input = /biosensors/empatica_e4/ibi
    feature = sdnn
    output = hrv_sdnn
    rate = 0
    window_s = 30
    overlap = 0.5
    channels = 1
    """
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read feature config {path}")
    jobs = []
    for section in parser.sections():
        s = parser[section]
        try:
            jobs.append(FeatureJob(
                input_topic=s["input"],
                feature=s["feature"],
                output_name=s.get("output", section),
                rate_hz=s.getfloat("rate", 0.0),
                window_s=s.getfloat("window_s", 30.0),
                overlap=s.getfloat("overlap", 0.5),
                channels=s.getint("channels", 1),
            ))
        except KeyError as exc:
            raise ConfigError(f"[{section}] missing required key {exc}") from None
    if not jobs:
        raise ConfigError(f"{path} defines no feature jobs")
    return jobs
