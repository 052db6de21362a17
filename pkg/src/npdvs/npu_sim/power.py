"""ME power model: dynamic power ~ V^2 * f * activity, plus optional leakage."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from ..vf import DEFAULT_VF_TABLE, VfOperatingPoint

BUSY_POWER_TARGET = 0.25  # W per ME at the top operating point
DEFAULT_K_DYN = BUSY_POWER_TARGET / (1.3 ** 2 * 600.0)


@dataclass(frozen=True)
class PowerCoefficients:
    k_dyn: float = DEFAULT_K_DYN  # W / (V^2 MHz)
    alpha_idle: float = 0.1
    k_static: float = 0.0  # W / V
    adder_energy: float = 0.0005  # uJ per arriving packet, TDVS traffic monitor

    def __post_init__(self):
        for name in ("k_dyn", "alpha_idle", "k_static", "adder_energy"):
            if getattr(self, name) < 0:
                raise ValueError(f"power.{name} must be >= 0")


def dynamic_power(point: VfOperatingPoint, busy: bool,
                  coeffs: PowerCoefficients = PowerCoefficients()) -> float:
    """Power in W of one ME at ``point``; idle/stalled MEs use ``alpha_idle``."""
    activity = 1.0 if busy else coeffs.alpha_idle
    v = point.voltage
    return coeffs.k_dyn * v * v * point.frequency * activity + coeffs.k_static * v


def accrue_energy(energy: float, powers: Iterable[float], dt: float,
                  arrivals: int = 0, adder_energy: float = 0.0) -> float:
    """Cumulative energy (uJ) after ``dt`` us at the given per-ME powers (W)."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    return energy + sum(powers) * dt + arrivals * adder_energy


def power_levels(table=DEFAULT_VF_TABLE, coeffs: PowerCoefficients = PowerCoefficients()):
    """Per level: (busy W, idle W, stalled W); a stall burns idle power."""
    out = []
    for p in table:
        busy = dynamic_power(p, True, coeffs)
        idle = dynamic_power(p, False, coeffs)
        out.append((busy, idle, idle))
    return out
