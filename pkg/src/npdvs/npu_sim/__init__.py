"""Event-driven NPU simulator."""

from .config import (
    BUILTIN_PROFILES,
    RX,
    TX,
    ConfigError,
    NpuConfig,
    WorkloadProfile,
    npu_config_from_mapping,
    parse_config_text,
    read_config_file,
)
from .power import PowerCoefficients, accrue_energy, dynamic_power, power_levels
from .simulator import (
    TRACE_HEADER,
    NpuSimulator,
    SimResult,
    SummaryStats,
    WindowStat,
    run_simulation,
    ticks_per_us,
)

__all__ = [
    "BUILTIN_PROFILES", "RX", "TX", "ConfigError", "NpuConfig", "WorkloadProfile",
    "npu_config_from_mapping", "parse_config_text", "read_config_file", "PowerCoefficients",
    "accrue_energy", "dynamic_power", "power_levels", "TRACE_HEADER", "NpuSimulator",
    "SimResult", "SummaryStats", "WindowStat", "run_simulation", "ticks_per_us",
]
