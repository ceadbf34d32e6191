"""LSL bridge: forwards lab-streaming-layer samples into sensor-node events.

Two sources exist behind the same interface: a live inlet (requires the
pylsl package and a discoverable stream) and a file-replay source for the
recorded fixture format:

    header line:  name,channels,rate
    data rows:    t,ch0,...,chN
"""

from __future__ import annotations

import csv
import time
from pathlib import Path
from typing import Iterator, Sequence

from ..errors import BackendUnavailable


class FileReplaySource:
    """Replays a recorded LSL capture, mapping columns to channel names.

    channel_map maps column index -> node channel name; default maps every
    column i to the header's declared name plus its index suffix only when
    no mapping is supplied.
    """

    def __init__(self, path: str | Path, channel_map: Sequence[str] | None = None,
                 realtime: bool = False):
        self.path = Path(path)
        if not self.path.exists():
            raise BackendUnavailable(f"LSL replay file not found: {self.path}")
        self.realtime = realtime
        with self.path.open() as fh:
            header = fh.readline().strip().split(",")
        if len(header) != 3:
            raise BackendUnavailable(f"bad LSL fixture header in {self.path}")
        self.stream_name = header[0]
        self.n_channels = int(header[1])
        self.rate_hz = float(header[2])
        if channel_map is None:
            channel_map = [f"{self.stream_name}_{i}" for i in range(self.n_channels)]
        if len(channel_map) < self.n_channels:
            raise BackendUnavailable(
                f"channel map has {len(channel_map)} names for {self.n_channels} channels")
        # a longer map is fine: fixtures may carry a column subset
        self.channel_map = list(channel_map)[: self.n_channels]
        self._stopped = False

    def stop(self):
        self._stopped = True

    def __iter__(self) -> Iterator[tuple[str, float]]:
        prev_t = None
        with self.path.open() as fh:
            fh.readline()  # header
            for row in csv.reader(fh):
                if self._stopped:
                    return
                if not row:
                    continue
                t = float(row[0])
                if self.realtime and prev_t is not None and t > prev_t:
                    time.sleep(t - prev_t)
                prev_t = t
                for i, cell in enumerate(row[1:self.n_channels + 1]):
                    yield self.channel_map[i], float(cell)


def lsl_inlet_source(stream_name: str, channel_map: Sequence[str],
                     resolve_timeout_s: float = 2.0, retries: int = 3):
    """Live LSL inlet; needs pylsl and a resolvable stream."""
    try:
        import pylsl
    except ImportError:
        raise BackendUnavailable("pylsl is not installed; use the file-replay source")
    streams = []
    for _ in range(retries):
        streams = pylsl.resolve_byprop("name", stream_name, timeout=resolve_timeout_s)
        if streams:
            break
    if not streams:
        raise BackendUnavailable(f"no LSL stream named {stream_name!r} found")
    inlet = pylsl.StreamInlet(streams[0])

    def gen():
        while True:
            sample, _ = inlet.pull_sample()
            for i, v in enumerate(sample[:len(channel_map)]):
                yield channel_map[i], float(v)

    return gen()
