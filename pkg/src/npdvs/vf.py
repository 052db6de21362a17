"""Voltage/frequency operating points."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator


@dataclass(frozen=True)
class VfOperatingPoint:
    frequency: float  # MHz
    voltage: float  # V


def xscale_voltage(frequency: float) -> float:
    """1.1 V at 400 MHz rising 0.05 V per 50 MHz, computed without float drift."""
    f = Fraction(repr(float(frequency)))
    return float(Fraction(11, 10) + Fraction(1, 20) * (f - 400) / 50)


class VfTable:
    """Operating points ordered fastest first; level 0 is the top point."""

    def __init__(self, points: Iterable[VfOperatingPoint]):
        pts = tuple(points)
        if not pts:
            raise ValueError("VF table needs at least one operating point")
        for a, b in zip(pts, pts[1:]):
            if not b.frequency < a.frequency:
                raise ValueError("VF table frequencies must be strictly decreasing")
        for p in pts:
            if p.frequency <= 0 or p.voltage <= 0:
                raise ValueError("frequencies and voltages must be positive")
        self.points = pts

    @classmethod
    def from_frequencies(cls, freqs: Iterable[float]) -> "VfTable":
        return cls(VfOperatingPoint(float(f), xscale_voltage(f)) for f in freqs)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, level: int) -> VfOperatingPoint:
        if not 0 <= level < len(self.points):
            raise IndexError(f"VF level {level} outside table")
        return self.points[level]

    def __iter__(self) -> Iterator[VfOperatingPoint]:
        return iter(self.points)

    def __eq__(self, other) -> bool:
        return isinstance(other, VfTable) and self.points == other.points

    def __repr__(self) -> str:
        body = ", ".join(f"{p.frequency:g}MHz/{p.voltage:g}V" for p in self.points)
        return f"VfTable({body})"

    @property
    def top(self) -> VfOperatingPoint:
        return self.points[0]

    @property
    def lowest_level(self) -> int:
        return len(self.points) - 1

    def level_of(self, frequency: float) -> int:
        for k, p in enumerate(self.points):
            if p.frequency == frequency:
                return k
        raise KeyError(f"{frequency} MHz is not in the VF table")

    def voltage(self, frequency: float) -> float:
        return self.points[self.level_of(frequency)].voltage

    def clamp(self, level: int) -> int:
        return min(max(level, 0), self.lowest_level)


DEFAULT_VF_TABLE = VfTable.from_frequencies([600, 550, 500, 450, 400])
REFERENCE_MHZ = 600.0
