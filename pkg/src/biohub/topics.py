"""Topic namespace: /biosensors/<sensor>/<data>, plus the derived
/biosensors/<sensor>/features/<name> extension used by the feature stage."""

from __future__ import annotations

import fnmatch
import re
from dataclasses import dataclass

_TOKEN = r"[a-z0-9_]+"
TOPIC_RE = re.compile(rf"^/biosensors/({_TOKEN})(/features)?/({_TOKEN})$")
_TOKEN_RE = re.compile(rf"^{_TOKEN}$")


@dataclass(frozen=True)
class TopicName:
    sensor: str
    data: str
    feature: bool = False

    def __post_init__(self):
        if not _TOKEN_RE.match(self.sensor):
            raise ValueError(f"bad sensor token: {self.sensor!r}")
        if not _TOKEN_RE.match(self.data):
            raise ValueError(f"bad data token: {self.data!r}")

    def render(self) -> str:
        mid = "/features" if self.feature else ""
        return f"/biosensors/{self.sensor}{mid}/{self.data}"

    def __str__(self) -> str:
        return self.render()

    @classmethod
    def parse(cls, text: str) -> "TopicName":
        m = TOPIC_RE.match(text)
        if not m:
            raise ValueError(f"invalid topic name: {text!r}")
        return cls(sensor=m.group(1), data=m.group(3), feature=m.group(2) is not None)


def is_valid_topic(text: str) -> bool:
    return TOPIC_RE.match(text) is not None


def topic_matches(name: str, pattern: str) -> bool:
    """Segment-wise glob match: '*' matches within one path segment, and a
    trailing '*' segment also covers the optional 'features' level, so
    /biosensors/polar_h10/* matches both plain and feature topics."""
    if pattern == name:
        return True
    nseg = name.split("/")
    pseg = pattern.split("/")
    if pseg and pseg[-1] == "*" and len(nseg) == len(pseg) + 1:
        # allow /biosensors/<s>/* to match /biosensors/<s>/features/<d>
        nseg = nseg[: len(pseg) - 1] + [nseg[-1]]
    if len(nseg) != len(pseg):
        return False
    return all(fnmatch.fnmatchcase(n, p) for n, p in zip(nseg, pseg))
