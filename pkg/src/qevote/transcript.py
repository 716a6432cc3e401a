"""Line-oriented protocol transcripts.

One event per line, UTF-8, ``key=value`` fields in a fixed order::

    seq=12 phase=2 round=1 step=0.0 kind=or.z sender=3 receiver=* payload=1

Values never contain spaces. Floats are written as the 16 hex digits of
their IEEE-754 big-endian bit pattern so transcripts are byte-stable
across platforms.

Recording levels control volume: ``SUMMARY`` keeps protocol decisions,
``PUBLIC`` adds every broadcast, ``FULL`` adds private-channel messages
and agent-local knowledge (never share a FULL transcript as a public
record: it contains the secret indices).
"""

import hashlib
import struct
from dataclasses import dataclass

OFF = 0
SUMMARY = 1
PUBLIC = 2
FULL = 3

LEVELS = {"off": OFF, "summary": SUMMARY, "public": PUBLIC, "full": FULL}

FIELDS = ("seq", "phase", "round", "step", "kind", "sender", "receiver", "payload")


def float_bits(x):
    return struct.pack(">d", float(x)).hex()


def bits_float(s):
    return struct.unpack(">d", bytes.fromhex(s))[0]


def bitstr(bits):
    return "".join("1" if b else "0" for b in bits)


def parse_bitstr(s):
    return tuple(int(c) for c in s)


@dataclass(frozen=True)
class TranscriptEvent:
    seq: int
    phase: int
    round: int
    step: str
    kind: str
    sender: str
    receiver: str
    payload: str
    level: int = PUBLIC

    def to_line(self):
        return " ".join(f"{name}={getattr(self, name)}" for name in FIELDS)

    @classmethod
    def from_line(cls, line, level=PUBLIC):
        parts = line.rstrip("\n").split(" ")
        if len(parts) != len(FIELDS):
            raise ValueError(f"malformed transcript line: {line!r}")
        values = {}
        for name, part in zip(FIELDS, parts):
            key, sep, value = part.partition("=")
            if key != name or not sep:
                raise ValueError(f"expected field {name!r}, got {part!r}")
            values[name] = value
        return cls(
            seq=int(values["seq"]),
            phase=int(values["phase"]),
            round=int(values["round"]),
            step=values["step"],
            kind=values["kind"],
            sender=values["sender"],
            receiver=values["receiver"],
            payload=values["payload"],
            level=level,
        )

    @property
    def is_broadcast(self):
        return self.receiver == "*"


class Transcript:
    """Append-only event log with strictly increasing sequence numbers."""

    def __init__(self, level=PUBLIC):
        if isinstance(level, str):
            level = LEVELS[level]
        self.level = level
        self.events = []

    def wants(self, level):
        return self.level >= level

    def emit(self, level, phase, round, kind, sender="*", receiver="*", payload="-", step="-"):
        if self.level < level:
            return None
        payload = str(payload)
        if not payload:
            payload = "-"
        for value in (kind, payload, step, str(sender), str(receiver)):
            if " " in value or "\n" in value:
                raise ValueError(f"transcript values may not contain whitespace: {value!r}")
        ev = TranscriptEvent(len(self.events), int(phase), int(round), str(step), kind,
                             str(sender), str(receiver), payload, level)
        self.events.append(ev)
        return ev

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def lines(self):
        return [ev.to_line() for ev in self.events]

    def text(self):
        return "".join(line + "\n" for line in self.lines())

    def digest(self):
        return hashlib.sha256(self.text().encode("utf-8")).hexdigest()

    def public_events(self):
        return [ev for ev in self.events if ev.level <= PUBLIC]

    def of_kind(self, prefix):
        return [ev for ev in self.events if ev.kind.startswith(prefix)]

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.text())

    @classmethod
    def read(cls, path, level=FULL):
        tr = cls(level)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    tr.events.append(TranscriptEvent.from_line(line))
        for i, ev in enumerate(tr.events):
            if ev.seq != i:
                raise ValueError(f"sequence numbers not contiguous at line {i}")
        return tr


def state_dump(transcript, state, phase=0, round=0, level=FULL):
    """Write a statevector as ``(index, re, im)`` records, one event each."""
    for idx, re, im in state.records():
        transcript.emit(level, phase, round, "state.amp", payload=f"{idx},{float_bits(re)},{float_bits(im)}")
