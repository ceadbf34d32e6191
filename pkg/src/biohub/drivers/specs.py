"""Static channel tables for the six supported sensors.

Channel sets (names, counts, message kinds) are fixed contracts; sampling
rates the vendor documents are fixed too, while the rest are configurable
defaults (see DEFAULT_RATES).
"""

from __future__ import annotations

from ..messages import MsgKind
from ..node import Category, ChannelSpec, SensorSpec

# Zephyr BioHarness device-defined waveform framing: 63 ECG samples per
# message at 256 Hz, 18 breathing samples per message at 1.008 msg/s.
ZEPHYR_ECG_RATE_HZ = 256.0
ZEPHYR_ECG_SAMPLES_PER_MSG = 63
ZEPHYR_BR_MSG_RATE_HZ = 1.008
ZEPHYR_BR_SAMPLES_PER_MSG = 18

EMOTIV_EEG_CHANNELS = ("af3", "af4", "t7", "t8", "pz")
EMOTIV_EEG_RATE_HZ = 128.0
EMOTIV_MET_LABELS = ("rui", "eng", "val", "exc", "foc", "med")
EMOTIV_BAND_LABELS = ("theta", "alpha", "low_beta", "high_beta", "gamma")

_RAW = Category.RAW
_CHUNK = Category.CHUNK
_HW = Category.HARDWARE


def _ch(name, category, kind, rate=0.0, width=1, fixed=None):
    return ChannelSpec(name=name, category=category, msg_kind=kind,
                       rate_hz=rate, width=width, fixed_chunk=fixed)


EMPATICA_E4 = SensorSpec("empatica_e4", (
    _ch("bvp", _RAW, MsgKind.F32, 64.0),
    _ch("bvp_chunk", _CHUNK, MsgKind.F32ARRAY),
    _ch("gsr", _RAW, MsgKind.F32, 4.0),
    _ch("gsr_chunk", _CHUNK, MsgKind.F32ARRAY),
    _ch("st", _RAW, MsgKind.F32, 4.0),
    _ch("st_chunk", _CHUNK, MsgKind.F32ARRAY),
    _ch("hr", _RAW, MsgKind.F32, 1.0),
    _ch("ibi", _RAW, MsgKind.F32, 0.0),          # event-driven, one per beat
    _ch("acc", _HW, MsgKind.F32ARRAY, 32.0, width=3),
    _ch("bat", _HW, MsgKind.F32, 0.2),
    _ch("tag", _HW, MsgKind.EMPTY, 0.0),         # event button
))

EMOTIV_INSIGHT = SensorSpec("emotiv_insight", (
    _ch("eeg", _RAW, MsgKind.F32ARRAY, EMOTIV_EEG_RATE_HZ, width=len(EMOTIV_EEG_CHANNELS)),
    _ch("eeg_chunk", _CHUNK, MsgKind.F32ARRAY),
    _ch("pow", _RAW, MsgKind.F32ARRAY, 2.0,
        width=len(EMOTIV_BAND_LABELS) * len(EMOTIV_EEG_CHANNELS)),
    _ch("pow_chunk", _CHUNK, MsgKind.F32ARRAY),
    _ch("met", _RAW, MsgKind.F32ARRAY, 2.0, width=len(EMOTIV_MET_LABELS)),
    _ch("mot", _HW, MsgKind.F32ARRAY, 32.0, width=9),
    _ch("dev", _HW, MsgKind.F32ARRAY, 2.0, width=1 + len(EMOTIV_EEG_CHANNELS)),
))

SHIMMER3_GSR = SensorSpec("shimmer3_gsr", (
    _ch("gsr", _RAW, MsgKind.F32, 16.0),
    _ch("gsr_chunk", _CHUNK, MsgKind.F32ARRAY),
    _ch("ppg", _RAW, MsgKind.F32, 64.0),
    _ch("ppg_chunk", _CHUNK, MsgKind.F32ARRAY),
))

POLAR_H10 = SensorSpec("polar_h10", (
    _ch("hr", _RAW, MsgKind.F32, 1.0),
))

VERNIER_RESPIRATION_BELT = SensorSpec("vernier_respiration_belt", (
    _ch("bpm", _RAW, MsgKind.F32, 1.0),
    _ch("bpm_chunk", _CHUNK, MsgKind.F32ARRAY),
    _ch("force", _RAW, MsgKind.F32, 50.0),
    _ch("force_chunk", _CHUNK, MsgKind.F32ARRAY),
))

ZEPHYR_BIOHARNESS = SensorSpec("zephyr_bioharness", (
    _ch("hr", _RAW, MsgKind.U8, 1.0),
    _ch("hrv", _RAW, MsgKind.U16, 1.0),
    _ch("ecg_chunk", _CHUNK, MsgKind.F32ARRAY,
        rate=ZEPHYR_ECG_RATE_HZ / ZEPHYR_ECG_SAMPLES_PER_MSG,
        fixed=ZEPHYR_ECG_SAMPLES_PER_MSG),
    _ch("br", _RAW, MsgKind.F32, 1.0),
    _ch("br_chunk", _CHUNK, MsgKind.F32ARRAY,
        rate=ZEPHYR_BR_MSG_RATE_HZ, fixed=ZEPHYR_BR_SAMPLES_PER_MSG),
))

SENSOR_SPECS: dict[str, SensorSpec] = {
    s.sensor_name: s for s in (
        EMPATICA_E4, EMOTIV_INSIGHT, SHIMMER3_GSR, POLAR_H10,
        VERNIER_RESPIRATION_BELT, ZEPHYR_BIOHARNESS,
    )
}
