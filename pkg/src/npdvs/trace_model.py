"""Trace events, the text trace format, and per-event-name indexing.

A trace file looks like::

    # annotations: cycle time energy p_loss
    365 1.573 0.768133 120 m2_pipeline
    366 1.577 0.773932 120 m3_pipeline
    367 1.580 0.784506 121 forward

Every row carries one value per header key followed by the event name.
Lines starting with ``#`` other than the header directive are comments.
"""

from __future__ import annotations

import io
import os
import re
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping, Sequence

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
HEADER_DIRECTIVE = "# annotations:"

WELL_KNOWN_KEYS = ("cycle", "time", "energy", "total_pkt", "total_bit", "idle_frac", "p_loss")
CUMULATIVE_KEYS = ("cycle", "time", "energy", "total_pkt", "total_bit")
INTEGER_KEYS = frozenset({"cycle", "total_pkt", "total_bit", "p_loss"})
DECIMALS = {"time": 3, "energy": 6, "idle_frac": 4}


class TraceParseError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class TraceWarning(UserWarning):
    """Non-fatal trace problem, e.g. a cumulative annotation that decreased."""


def check_key(name: str) -> str:
    if not isinstance(name, str) or not IDENT_RE.match(name):
        raise ValueError(f"invalid annotation key {name!r}")
    return name


@dataclass(frozen=True)
class TraceEvent:
    name: str
    annotations: Mapping[str, float]

    def __getitem__(self, key: str) -> float:
        return self.annotations[key]


def format_value(key: str, value: float) -> str:
    if key in INTEGER_KEYS:
        return str(int(round(value)))
    if key in DECIMALS:
        return f"{value:.{DECIMALS[key]}f}"
    return repr(float(value))


def quantize(key: str, value: float) -> float:
    """Round ``value`` the way :func:`format_value` prints it."""
    if key in INTEGER_KEYS:
        return float(int(round(value)))
    if key in DECIMALS:
        return round(value, DECIMALS[key])
    return float(value)


def format_event(event: TraceEvent, header: Sequence[str]) -> str:
    ann = event.annotations
    cols = [format_value(k, ann[k]) for k in header]
    cols.append(event.name)
    return " ".join(cols)


def parse_header(line: str) -> tuple[str, ...]:
    if not line.startswith(HEADER_DIRECTIVE):
        raise TraceParseError("missing '# annotations:' header directive")
    keys = tuple(line[len(HEADER_DIRECTIVE):].split())
    for k in keys:
        check_key(k)
    if len(set(keys)) != len(keys):
        raise TraceParseError("duplicate annotation key in header")
    return keys


def parse_trace_line(line: str, header: Sequence[str], lineno: int | None = None) -> TraceEvent:
    """Parse one row: ``len(header)`` numbers, then the event name."""
    cols = line.split()
    if len(cols) != len(header) + 1:
        raise TraceParseError(
            f"expected {len(header) + 1} columns, got {len(cols)}", lineno)
    name = cols[-1]
    if not IDENT_RE.match(name):
        raise TraceParseError(f"bad event name {name!r}", lineno)
    ann = {}
    for key, text in zip(header, cols):
        try:
            ann[key] = float(text)
        except ValueError:
            raise TraceParseError(f"malformed number {text!r} for {key}", lineno) from None
    return TraceEvent(name, ann)


class Trace:
    """Header plus an ordered event sequence.

    ``events`` may be a one-shot iterator (a streamed file) or a list. Call
    :meth:`materialize` to get a reusable, indexable trace.
    """

    def __init__(self, header: Sequence[str], events: Iterable[TraceEvent] = (),
                 warnings: list[str] | None = None):
        self.header = tuple(check_key(k) for k in header)
        self.events = events
        self.warnings = warnings if warnings is not None else []

    @property
    def is_materialized(self) -> bool:
        return isinstance(self.events, (list, tuple))

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        if not self.is_materialized:
            raise TypeError("streamed trace has no length; materialize() first")
        return len(self.events)

    def materialize(self) -> "Trace":
        if self.is_materialized:
            return self
        events = list(self.events)
        self.events = events
        return self

    def index(self) -> "EventIndex":
        return EventIndex.build(self.materialize().events)


def _open_text(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="ascii"), True
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)) or "b" in getattr(source, "mode", ""):
        return io.TextIOWrapper(source, encoding="ascii"), False
    return source, False


def read_trace(source) -> Trace:
    """Open a trace for streaming.

    ``source`` is a path, a binary stream or a text stream. The header is read
    immediately; events are parsed lazily as the returned trace is iterated.
    Decreasing cumulative annotations produce a :class:`TraceWarning` and are
    recorded in ``trace.warnings``.
    """
    fh, owned = _open_text(source)
    lineno = 0
    header = None
    for raw in fh:
        lineno += 1
        line = raw.strip()
        if not line:
            continue
        if line.startswith(HEADER_DIRECTIVE):
            header = parse_header(line)
            break
        if line.startswith("#"):
            continue
        break
    if header is None:
        if owned:
            fh.close()
        raise TraceParseError("missing '# annotations:' header directive", lineno or None)

    problems: list[str] = []
    trace = Trace(header, (), problems)
    trace.events = _stream_events(fh, owned, header, lineno, problems)
    return trace


def _stream_events(fh, owned, header, lineno, problems) -> Iterator[TraceEvent]:
    watched = [k for k in CUMULATIVE_KEYS if k in header]
    last = {k: None for k in watched}
    pos = 0
    try:
        for raw in fh:
            lineno += 1
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            ev = parse_trace_line(line, header, lineno)
            for k in watched:
                v = ev.annotations[k]
                prev = last[k]
                if prev is not None and v < prev:
                    msg = f"line {lineno} (event {pos}): {k} decreased from {prev} to {v}"
                    problems.append(msg)
                    warnings.warn(msg, TraceWarning, stacklevel=2)
                last[k] = v
            pos += 1
            yield ev
    finally:
        if owned:
            fh.close()


def write_trace(trace: Trace, dest) -> int:
    """Write ``trace`` to a path or text stream; returns the event count."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="ascii", newline="\n") as fh:
            return write_trace(trace, fh)
    header = trace.header
    dest.write(HEADER_DIRECTIVE + " " + " ".join(header) + "\n")
    n = 0
    for ev in trace:
        dest.write(format_event(ev, header))
        dest.write("\n")
        n += 1
    return n


@dataclass
class EventIndex:
    """Positions of each event name's instances, in trace order."""

    positions: dict[str, list[int]] = field(default_factory=dict)
    total: int = 0

    @classmethod
    def build(cls, events: Iterable[TraceEvent]) -> "EventIndex":
        positions: dict[str, list[int]] = {}
        n = 0
        for n, ev in enumerate(events, 1):
            positions.setdefault(ev.name, []).append(n - 1)
        return cls(positions, n)

    def count(self, name: str) -> int:
        return len(self.positions.get(name, ()))

    def instance_at(self, name: str, i: int) -> int | None:
        if i < 0:
            raise ValueError("instance index must be >= 0")
        pos = self.positions.get(name)
        if pos is None or i >= len(pos):
            return None
        return pos[i]


def instance_at(index: EventIndex, name: str, i: int) -> int | None:
    return index.instance_at(name, i)
