"""Traffic-based (TDVS) and execution-based (EDVS) voltage scaling decisions.

Both controllers are evaluated once per monitor window and move the VF level
by at most one step, clamped to the table. The simulator owns the window
counters; everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .vf import DEFAULT_VF_TABLE, REFERENCE_MHZ, VfTable

SCALING_PENALTY_US = 10.0
TDVS_WINDOWS = (20_000, 40_000, 60_000, 80_000)
TDVS_THRESHOLDS = (800, 1000, 1200, 1400)
EDVS_WINDOWS = (20_000, 40_000, 60_000)

UP, DOWN, HOLD = "up", "down", "hold"


def _frac(x) -> Fraction:
    return Fraction(repr(float(x))) if isinstance(x, float) else Fraction(x)


def threshold_for_level(top: float, frequency: float, reference: float = REFERENCE_MHZ) -> int:
    """Traffic threshold (Mbps) for a reduced frequency: floor(top * f / f_ref)."""
    return math.floor(_frac(top) * _frac(frequency) / _frac(reference))


@dataclass(frozen=True)
class DvsDecision:
    direction: str
    level: int


def _step(level: int, direction: str, table: VfTable) -> DvsDecision:
    # level 0 is the fastest point, so "up" means a smaller level number
    if direction == UP:
        new = table.clamp(level - 1)
    elif direction == DOWN:
        new = table.clamp(level + 1)
    else:
        new = level
    return DvsDecision(direction if new != level else HOLD, new)


@dataclass(frozen=True)
class TdvsPolicy:
    top_threshold: float = 1000.0  # Mbps at the reference frequency
    window: int = 40_000  # reference-clock cycles
    vf_table: VfTable = field(default=DEFAULT_VF_TABLE, compare=False)

    kind = "tdvs"

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("TDVS window must be > 0 cycles")
        if self.top_threshold < 0:
            raise ValueError("TDVS threshold must be >= 0")

    @property
    def thresholds(self) -> list[int]:
        ref = self.vf_table.top.frequency
        return [threshold_for_level(self.top_threshold, p.frequency, ref) for p in self.vf_table]

    def threshold(self, level: int) -> int:
        ref = self.vf_table.top.frequency
        return threshold_for_level(self.top_threshold, self.vf_table[level].frequency, ref)

    def decide(self, rate: float, level: int) -> DvsDecision:
        return tdvs_decide(self, rate, level)


@dataclass(frozen=True)
class EdvsPolicy:
    idle_threshold: float = 0.10
    window: int = 40_000  # reference-clock cycles
    vf_table: VfTable = field(default=DEFAULT_VF_TABLE, compare=False)

    kind = "edvs"

    def __post_init__(self):
        if not 0 < self.idle_threshold < 1:
            raise ValueError("EDVS idle threshold must be in (0, 1)")
        if self.window <= 0:
            raise ValueError("EDVS window must be > 0 cycles")

    def decide(self, idle_frac: float, level: int) -> DvsDecision:
        return edvs_decide(self, idle_frac, level)


def tdvs_decide(policy: TdvsPolicy, window_rate: float, current_level: int) -> DvsDecision:
    if window_rate < 0:
        raise ValueError("traffic rate must be >= 0")
    thr = policy.threshold(current_level)
    if window_rate < thr:
        return _step(current_level, DOWN, policy.vf_table)
    if window_rate > thr:
        return _step(current_level, UP, policy.vf_table)
    return DvsDecision(HOLD, current_level)


def edvs_decide(policy: EdvsPolicy, idle_frac: float, current_level: int) -> DvsDecision:
    if not 0 <= idle_frac <= 1:
        raise ValueError("idle fraction must be in [0, 1]")
    if idle_frac > policy.idle_threshold:
        return _step(current_level, DOWN, policy.vf_table)
    if idle_frac < policy.idle_threshold:
        return _step(current_level, UP, policy.vf_table)
    return DvsDecision(HOLD, current_level)


@dataclass
class MonitorWindow:
    """Counters for one monitor window; reset at every boundary."""

    start_us: float = 0.0
    bits: int = 0
    packets: int = 0
    idle_cycles: float = 0.0
    total_cycles: float = 0.0

    def add_packet(self, size_bits: int) -> None:
        self.bits += size_bits
        self.packets += 1

    def reset(self, start_us: float) -> None:
        self.start_us = start_us
        self.bits = 0
        self.packets = 0
        self.idle_cycles = 0.0
        self.total_cycles = 0.0


def window_rate(window: MonitorWindow | int | float, duration_us: float) -> float:
    """Traffic in Mbps; one bit per microsecond is one Mbps."""
    if duration_us <= 0:
        raise ValueError("window duration must be > 0")
    bits = window.bits if isinstance(window, MonitorWindow) else window
    return bits / duration_us


def tdvs_overhead_energy(packets: int, adder_energy: float) -> float:
    """Energy (uJ) of the traffic-accumulating adder for ``packets`` arrivals."""
    return packets * adder_energy
