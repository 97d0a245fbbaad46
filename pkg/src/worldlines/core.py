"""Shared vocabulary: amplitudes, qualia tokens, observers, phases, channels.

Everything here is immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import enum
import math
import re as _re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .errors import InvalidAmplitude

#: Tolerance for probability-conservation checks throughout the package.
NORMALIZATION_TOL = 1e-9

# Amplitudes are plain double-precision complex numbers.
Amplitude = complex


def born_probability(c: Amplitude) -> float:
    """Squared magnitude of an amplitude: the Born weight of its branch.

    Raises InvalidAmplitude for NaN/infinite components.
    """
    c = complex(c)
    if not (math.isfinite(c.real) and math.isfinite(c.imag)):
        raise InvalidAmplitude(f"non-finite amplitude {c!r}")
    return c.real * c.real + c.imag * c.imag


_ATOM_KINDS = frozenset(
    {"RED", "BLUE", "PAIN", "NO_PAIN", "DEATH", "DYING", "ALIVE", "CURIOUS", "WIN", "LOSE"}
)
_PAYLOAD_KINDS = frozenset({"HEAR", "READ", "CUSTOM", "DIGIT"})


@dataclass(frozen=True)
class Qualia:
    """One discrete experienced token.

    Tokens compare structurally; HEAR("x") and READ("x") are distinct.
    HEAR/READ/CUSTOM payloads are case-sensitive exact strings, DIGIT carries
    0 or 1.
    """

    kind: str
    payload: Union[str, int, None] = None

    def __post_init__(self):
        if self.kind in _ATOM_KINDS:
            if self.payload is not None:
                raise ValueError(f"{self.kind} takes no payload")
        elif self.kind == "DIGIT":
            if self.payload not in (0, 1):
                raise ValueError("DIGIT payload must be 0 or 1")
        elif self.kind in _PAYLOAD_KINDS:
            if not isinstance(self.payload, str):
                raise ValueError(f"{self.kind} requires a text payload")
        else:
            raise ValueError(f"unknown qualia kind {self.kind!r}")

    def __str__(self) -> str:
        return format_qualia(self)

    @staticmethod
    def hear(text: str) -> "Qualia":
        return Qualia("HEAR", text)

    @staticmethod
    def read(text: str) -> "Qualia":
        return Qualia("READ", text)

    @staticmethod
    def custom(text: str) -> "Qualia":
        return Qualia("CUSTOM", text)

    @staticmethod
    def digit(bit: int) -> "Qualia":
        return Qualia("DIGIT", bit)


RED = Qualia("RED")
BLUE = Qualia("BLUE")
PAIN = Qualia("PAIN")
NO_PAIN = Qualia("NO_PAIN")
DEATH = Qualia("DEATH")
DYING = Qualia("DYING")
ALIVE = Qualia("ALIVE")
CURIOUS = Qualia("CURIOUS")
WIN = Qualia("WIN")
LOSE = Qualia("LOSE")


def format_qualia(q: Qualia) -> str:
    """Canonical text form used by the DSL, logs and JSON dumps."""
    if q.kind in _ATOM_KINDS:
        return q.kind
    if q.kind == "DIGIT":
        return f"DIGIT({q.payload})"
    escaped = str(q.payload).replace("\\", "\\\\").replace('"', '\\"')
    return f'{q.kind}("{escaped}")'


_QUALIA_RE = _re.compile(
    r'^(?:(?P<atom>[A-Z_]+)|(?P<kind>HEAR|READ|CUSTOM)\("(?P<text>(?:[^"\\]|\\.)*)"\)'
    r"|DIGIT\((?P<bit>[01])\))$"
)


def parse_qualia(text: str) -> Qualia:
    """Inverse of :func:`format_qualia`."""
    m = _QUALIA_RE.match(text.strip())
    if m is None:
        raise ValueError(f"not a qualia token: {text!r}")
    if m.group("bit") is not None:
        return Qualia.digit(int(m.group("bit")))
    if m.group("kind") is not None:
        raw = m.group("text").replace('\\"', '"').replace("\\\\", "\\")
        return Qualia(m.group("kind"), raw)
    return Qualia(m.group("atom"))


class Designation(enum.Enum):
    READER = "reader"
    EXTERNAL = "external"


@dataclass(frozen=True)
class ObserverId:
    """An observer in a scenario; exactly one carries the READER designation."""

    id: str
    designation: Designation = Designation.EXTERNAL

    @property
    def is_reader(self) -> bool:
        return self.designation is Designation.READER


READER = ObserverId("reader", Designation.READER)


class Phase(enum.IntEnum):
    """Symbolic event phases, ordered within a single branching episode.

    The integers give the ordering T_B < T_BS < T_DS < T_AT < T_P; wall-clock
    durations are deliberately not modelled.
    """

    T_B = 0
    T_BS = 1
    T_DS = 2
    T_AT = 3
    T_P = 4


@dataclass(frozen=True, order=True)
class PhaseTag:
    """Phase plus a global step counter (steps strictly increase along paths)."""

    step: int
    phase: Phase

    def __post_init__(self):
        if self.step < 0:
            raise ValueError("step must be non-negative")


@dataclass(frozen=True)
class Channel:
    """How outcomes reach the reader: outcome label -> experienced token.

    A non-injective mapping is legal and models information hiding; the reader
    can distinguish outcomes only through an injective channel.
    """

    name: str
    mapping: Mapping[str, Qualia] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "mapping", dict(self.mapping))

    def deliver(self, label: str) -> Qualia:
        return self.mapping[label]

    def tokens(self) -> frozenset:
        """Every token this channel can deliver."""
        return frozenset(self.mapping.values())

    @property
    def is_injective(self) -> bool:
        return len(set(self.mapping.values())) == len(self.mapping)


def speech_channel(phrases: Mapping[str, str], name: str = "speech") -> Channel:
    """Outcomes communicated by hearing a spoken phrase."""
    return Channel(name, {k: Qualia.hear(v) for k, v in phrases.items()})


def written_channel(notes: Mapping[str, str], name: str = "written") -> Channel:
    """Outcomes communicated by reading a written note."""
    return Channel(name, {k: Qualia.read(v) for k, v in notes.items()})


def light_channel(colors: Optional[Mapping[str, Qualia]] = None, name: str = "lights") -> Channel:
    """Outcomes communicated by colored flashes (the direct apparatus channel)."""
    return Channel(name, dict(colors) if colors else {"L": RED, "R": BLUE})
