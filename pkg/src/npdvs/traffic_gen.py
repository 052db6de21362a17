"""Synthetic packet arrivals and CSV arrival import."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NUM_PORTS = 16
DEFAULT_PACKET_BITS = 512
NAMED_RATES = {"high": 1400.0, "medium": 900.0, "low": 400.0}


class TrafficError(ValueError):
    pass


@dataclass(frozen=True)
class Packet:
    time: float  # arrival, us
    size: int  # bits
    port: int


@dataclass(frozen=True)
class Segment:
    duration: float  # us
    rate: float  # Mbps offered

    def __post_init__(self):
        if not self.duration > 0:
            raise TrafficError("segment duration must be > 0")
        if self.rate < 0:
            raise TrafficError("segment rate must be >= 0")


@dataclass(frozen=True)
class TrafficProfile:
    segments: tuple[Segment, ...]
    # either a single size or a list of (size_bits, weight)
    sizes: tuple[tuple[int, float], ...] = ((DEFAULT_PACKET_BITS, 1.0),)
    arrival: str = "poisson"
    seed: int = 0
    ports: int = NUM_PORTS

    def __post_init__(self):
        if not self.segments:
            raise TrafficError("traffic profile needs at least one segment")
        if self.arrival not in ("poisson", "uniform"):
            raise TrafficError(f"unknown arrival process {self.arrival!r}")
        if any(s <= 0 for s, _ in self.sizes):
            raise TrafficError("packet sizes must be > 0")
        if any(w < 0 for _, w in self.sizes) or not math.isclose(sum(w for _, w in self.sizes), 1.0):
            raise TrafficError("packet size weights must be >= 0 and sum to 1")
        if self.ports < 1:
            raise TrafficError("need at least one port")

    @property
    def mean_size(self) -> float:
        return sum(s * w for s, w in self.sizes)

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)


def named_profile(name: str, duration_us: float, seed: int = 0, *,
                  rate: float | None = None, packet_bits: int = DEFAULT_PACKET_BITS,
                  arrival: str = "poisson") -> TrafficProfile:
    """``high``/``medium``/``low`` constant-rate profile covering ``duration_us``."""
    if name not in NAMED_RATES:
        raise TrafficError(f"unknown traffic level {name!r}; expected one of {sorted(NAMED_RATES)}")
    r = NAMED_RATES[name] if rate is None else rate
    return TrafficProfile((Segment(duration_us, r),), ((packet_bits, 1.0),), arrival, seed)


def _uniform_count(duration: float, spacing: float) -> int:
    q = duration / spacing
    n = round(q)
    # arrivals at k*spacing for k*spacing < duration
    return n if math.isclose(q, n, rel_tol=1e-12, abs_tol=1e-9) else math.ceil(q)


def generate(profile: TrafficProfile) -> list[Packet]:
    """Arrival sequence for ``profile``; deterministic for a fixed seed."""
    rng = np.random.default_rng(profile.seed)
    sizes = np.array([s for s, _ in profile.sizes], dtype=np.int64)
    weights = np.array([w for _, w in profile.sizes], dtype=float)
    mean_size = profile.mean_size
    times: list[np.ndarray] = []
    t0 = 0.0
    for seg in profile.segments:
        end = t0 + seg.duration
        if seg.rate > 0:
            spacing = mean_size / seg.rate  # us between packets
            if profile.arrival == "uniform":
                n = _uniform_count(seg.duration, spacing)
                times.append(t0 + spacing * np.arange(n))
            else:
                chunk = max(16, int(seg.duration / spacing * 1.1) + 16)
                t = t0
                parts = []
                while True:
                    gaps = rng.exponential(spacing, chunk)
                    ts = t + np.cumsum(gaps)
                    keep = ts[ts < end]
                    parts.append(keep)
                    if len(keep) < chunk:
                        break
                    t = ts[-1]
                times.append(np.concatenate(parts))
        t0 = end
    all_t = np.concatenate(times) if times else np.empty(0)
    if len(sizes) == 1:
        all_s = np.full(len(all_t), sizes[0])
    else:
        all_s = rng.choice(sizes, size=len(all_t), p=weights)
    ports = profile.ports
    return [Packet(float(t), int(s), k % ports) for k, (t, s) in enumerate(zip(all_t, all_s))]


def import_csv(source) -> list[Packet]:
    """Read ``time_us,size_bits,port`` rows; a header row is allowed.

    Rows must be in non-decreasing time order.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return import_csv(fh)
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)):
        source = io.TextIOWrapper(source, encoding="utf-8")
    packets: list[Packet] = []
    last = -math.inf
    for lineno, row in enumerate(csv.reader(source), 1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if lineno == 1 and row[0].strip() == "time_us":
            continue
        if len(row) != 3:
            raise TrafficError(f"row {lineno}: expected 3 columns time_us,size_bits,port")
        try:
            t = float(row[0])
            size = int(row[1])
            port = int(row[2])
        except ValueError:
            raise TrafficError(f"row {lineno}: malformed value in {row!r}") from None
        if not math.isfinite(t) or t < 0 or size <= 0 or port < 0:
            raise TrafficError(f"row {lineno}: out-of-range value in {row!r}")
        if t < last:
            raise TrafficError(f"row {lineno}: time {t} is earlier than the previous row ({last})")
        last = t
        packets.append(Packet(t, size, port))
    return packets


def write_csv(packets: Sequence[Packet], dest) -> None:
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="") as fh:
            return write_csv(packets, fh)
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(["time_us", "size_bits", "port"])
    for p in packets:
        w.writerow([repr(p.time), p.size, p.port])
