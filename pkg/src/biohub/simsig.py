"""Seeded synthetic biosignal generators.

Every generator is a pure function of (config, rate, n): the same inputs
give bit-identical output arrays. Waveforms are synthetic archetypes
(von-Mises pulse shapes, band-limited sinusoids), chosen so spectra,
rates, and value ranges are right, not for clinical realism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# distinct RNG streams per signal family, mixed with the config seed
_STREAM = {"ppg": 11, "ecg": 23, "force": 37, "gsr": 41, "eeg": 53, "misc": 67}


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    heart_rate_bpm: float = 70.0
    breath_rate_bpm: float = 15.0
    gsr_baseline_uS: float = 2.0
    noise_sigma: float = 0.02      # fraction of signal amplitude
    # per-band EEG amplitudes in uV: [theta, alpha, low beta, high beta, gamma]
    eeg_band_amps_uV: tuple = (4.0, 10.0, 3.0, 2.0, 1.5)

    def __post_init__(self):
        if self.heart_rate_bpm <= 0 or self.breath_rate_bpm <= 0:
            raise ValueError("rates must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def rng(self, stream: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, _STREAM[stream]])


def _times(rate_hz: float, n: int) -> np.ndarray:
    if rate_hz <= 0:
        raise ValueError("rate_hz must be positive")
    return np.arange(n, dtype=np.float64) / rate_hz


def gen_ppg(cfg: SimConfig, rate_hz: float, n: int) -> np.ndarray:
    """Quasi-periodic pulse wave, fundamental at heart_rate_bpm/60 Hz.

    The deterministic part is a pure function of beat phase, so with
    noise_sigma=0 the output is exactly periodic in one beat interval.
    """
    t = _times(rate_hz, n)
    phase = TWO_PI * (cfg.heart_rate_bpm / 60.0) * t
    # systolic peak plus a smaller dicrotic bump, von-Mises shaped, riding
    # on a strong fundamental so the spectral peak sits at the pulse rate
    x = (np.exp(8.0 * (np.cos(phase) - 1.0))
         + 0.35 * np.exp(12.0 * (np.cos(phase - 2.4) - 1.0))
         + 0.6 * np.cos(phase))
    if cfg.noise_sigma > 0:
        x = x + cfg.rng("ppg").normal(0.0, cfg.noise_sigma, n)
    return x


def gen_ecg(cfg: SimConfig, rate_hz: float, n: int) -> np.ndarray:
    """ECG archetype: tall narrow R spike, small Q/S dips, P and T bumps.

    R-peak count over T seconds is heart_rate_bpm * T / 60 (+-1 boundary
    beat). Output bounded to [-2, 2] model units.
    """
    t = _times(rate_hz, n)
    phase = TWO_PI * (cfg.heart_rate_bpm / 60.0) * t

    def bump(center, width_kappa, amp):
        return amp * np.exp(width_kappa * (np.cos(phase - center) - 1.0))

    x = (bump(0.0, 120.0, 1.5)        # R
         + bump(-0.25, 200.0, -0.25)  # Q
         + bump(0.25, 200.0, -0.3)    # S
         + bump(-1.4, 30.0, 0.15)     # P
         + bump(1.8, 18.0, 0.3))      # T
    if cfg.noise_sigma > 0:
        x = x + cfg.rng("ecg").normal(0.0, cfg.noise_sigma, n)
    return np.clip(x, -2.0, 2.0)


def gen_respiration_force(cfg: SimConfig, rate_hz: float, n: int) -> np.ndarray:
    """Breathing force in newtons: sinusoid plus slow drift, clipped to
    [0, 50] N and quantized to the device's 0.01 N resolution."""
    t = _times(rate_hz, n)
    f_breath = cfg.breath_rate_bpm / 60.0
    x = (25.0
         + 10.0 * np.sin(TWO_PI * f_breath * t)
         + 2.0 * np.sin(TWO_PI * 0.01 * t + 1.0))
    if cfg.noise_sigma > 0:
        x = x + cfg.rng("force").normal(0.0, 10.0 * cfg.noise_sigma, n)
    x = np.clip(x, 0.0, 50.0)
    return np.round(x * 100.0) / 100.0


def gen_gsr(cfg: SimConfig, rate_hz: float, n: int) -> np.ndarray:
    """Skin conductance in microsiemens: slow tonic wander around the
    configured baseline plus seeded phasic decay events; non-negative."""
    t = _times(rate_hz, n)
    rng = cfg.rng("gsr")
    x = cfg.gsr_baseline_uS * (1.0 + 0.05 * np.sin(TWO_PI * 0.005 * t + 0.7))
    # phasic events: ~3 per minute, sharp rise with two-time-constant decay
    duration = n / rate_hz
    n_events = rng.poisson(max(duration, 1.0) / 20.0)
    onsets = np.sort(rng.uniform(0.0, max(duration, 1.0), n_events))
    amps = rng.uniform(0.05, 0.25, n_events) * cfg.gsr_baseline_uS
    for onset, amp in zip(onsets, amps):
        dt = t - onset
        mask = dt >= 0
        x[mask] += amp * (np.exp(-dt[mask] / 3.0) - np.exp(-dt[mask] / 0.4))
    if cfg.noise_sigma > 0:
        x = x + rng.normal(0.0, cfg.noise_sigma * cfg.gsr_baseline_uS, n)
    return np.clip(x, 0.0, None)


# EEG band edges in Hz; order fixed across the package
EEG_BANDS = (
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 12.0),
    ("low_beta", 12.0, 16.0),
    ("high_beta", 16.0, 25.0),
    ("gamma", 25.0, 45.0),
)
_EEG_CENTER_HZ = (6.0, 10.0, 14.0, 20.0, 35.0)
EEG_RANGE_UV = 100.0
EEG_BITS = 14


def gen_eeg(cfg: SimConfig, rate_hz: float, n_channels: int, n: int) -> np.ndarray:
    """Multi-channel EEG in microvolts, shape (n, n_channels): one
    sinusoid per band with per-channel seeded phases, plus noise,
    quantized to a 14-bit grid over +-100 uV."""
    t = _times(rate_hz, n)
    rng = cfg.rng("eeg")
    phases = rng.uniform(0.0, TWO_PI, size=(len(_EEG_CENTER_HZ), n_channels))
    x = np.zeros((n, n_channels))
    for b, (freq, amp) in enumerate(zip(_EEG_CENTER_HZ, cfg.eeg_band_amps_uV)):
        x += amp * np.sin(TWO_PI * freq * t[:, None] + phases[b])
    if cfg.noise_sigma > 0:
        amp_scale = max(cfg.eeg_band_amps_uV)
        x = x + rng.normal(0.0, cfg.noise_sigma * amp_scale, size=x.shape)
    step = 2.0 * EEG_RANGE_UV / (1 << EEG_BITS)
    x = np.clip(x, -EEG_RANGE_UV, EEG_RANGE_UV - step)
    return np.round(x / step) * step


# -- slow scalar streams used by driver hardware/summary channels ------------

def gen_hr_series(cfg: SimConfig, rate_hz: float, n: int) -> np.ndarray:
    """Heart-rate readout in bpm: configured rate plus slow seeded wander."""
    t = _times(rate_hz, n)
    rng = cfg.rng("misc")
    wander = 2.0 * np.sin(TWO_PI * 0.01 * t + rng.uniform(0, TWO_PI))
    return cfg.heart_rate_bpm + wander


def gen_ibi_series(cfg: SimConfig, n: int) -> np.ndarray:
    """Inter-beat intervals in seconds with mild seeded variability."""
    rng = cfg.rng("misc")
    base = 60.0 / cfg.heart_rate_bpm
    jitter = rng.normal(0.0, 0.03 * base, n)
    return np.clip(base + jitter, 0.2, 3.0)
