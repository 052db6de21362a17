"""NPU configuration, workload profiles and the flat ``key = value`` config format."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from typing import Mapping

from ..vf import DEFAULT_VF_TABLE, VfTable
from .power import PowerCoefficients

RX, TX = "rx", "tx"
EVENT_KINDS = frozenset({"fifo", "forward", "idle", "pipeline"})
DEFAULT_EMIT = frozenset({"fifo", "forward", "idle"})


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WorkloadProfile:
    """Per-packet cost of one benchmark.

    ``compute_cycles`` is the whole per-packet instruction budget; the last
    ``tx_cycles`` of it run on a transmit ME, the rest on a receive ME
    interleaved with the memory accesses. Accesses are issued in dependent
    chains of up to ``mem_chain`` back-to-back references.
    """

    name: str
    compute_cycles: int
    sram_accesses: int
    sdram_accesses: int
    poll_cycles: int = 8
    tx_cycles: int = 614
    mem_chain: int = 4

    def __post_init__(self):
        for k in ("compute_cycles", "sram_accesses", "sdram_accesses", "poll_cycles", "tx_cycles"):
            if getattr(self, k) < 0:
                raise ConfigError(f"profile.{k} must be >= 0")
        if self.tx_cycles > self.compute_cycles:
            raise ConfigError("profile.tx_cycles cannot exceed profile.compute_cycles")
        if self.mem_chain < 1:
            raise ConfigError("profile.mem_chain must be >= 1")

    @property
    def rx_cycles(self) -> int:
        return self.compute_cycles - self.tx_cycles

    @property
    def memory_accesses(self) -> int:
        return self.sram_accesses + self.sdram_accesses


# Transmit cost is shared: 2 transmit MEs at 600 MHz move ~1000 Mbps of
# 512-bit packets. Receive-side costs follow the benchmarks' memory behaviour.
BUILTIN_PROFILES = {
    "ipfwdr": WorkloadProfile("ipfwdr", compute_cycles=1254, sram_accesses=8, sdram_accesses=32),
    "url": WorkloadProfile("url", compute_cycles=1174, sram_accesses=20, sdram_accesses=35),
    "nat": WorkloadProfile("nat", compute_cycles=1638, sram_accesses=1, sdram_accesses=0),
    "md4": WorkloadProfile("md4", compute_cycles=1334, sram_accesses=30, sdram_accesses=30),
}


def default_roles(num_mes: int) -> tuple[str, ...]:
    n_tx = num_mes // 3
    return (RX,) * (num_mes - n_tx) + (TX,) * n_tx


@dataclass(frozen=True)
class NpuConfig:
    num_mes: int = 6
    threads_per_me: int = 4
    role_map: tuple[str, ...] | None = None
    ports: int = 16
    sram_latency: int = 26  # cycles at the reference clock
    sdram_latency: int = 100
    queue_capacity: int = 256  # packets buffered between arrival and forward
    profile: WorkloadProfile = BUILTIN_PROFILES["ipfwdr"]
    power: PowerCoefficients = PowerCoefficients()
    vf_table: VfTable = field(default=DEFAULT_VF_TABLE)
    emit: frozenset = DEFAULT_EMIT
    sim_length: int = 8_000_000  # reference-clock cycles
    seed: int = 0
    monitor_window: int = 40_000  # idle sampling period without EDVS
    penalty_us: float = 10.0

    def __post_init__(self):
        if self.num_mes < 1:
            raise ConfigError("num_mes must be >= 1")
        if self.threads_per_me < 1:
            raise ConfigError("threads_per_me must be >= 1")
        roles = default_roles(self.num_mes) if self.role_map is None else tuple(self.role_map)
        if len(roles) != self.num_mes:
            raise ConfigError(f"role_map has {len(roles)} entries for {self.num_mes} MEs")
        if any(r not in (RX, TX) for r in roles):
            raise ConfigError("role_map entries must be rx or tx")
        if RX not in roles:
            raise ConfigError("role_map needs at least one rx ME")
        object.__setattr__(self, "role_map", roles)
        if self.sram_latency <= 0 or self.sdram_latency <= 0:
            raise ConfigError("memory latencies must be > 0")
        if self.sim_length <= 0:
            raise ConfigError("sim_length must be > 0")
        if self.queue_capacity < 1:
            raise ConfigError("queue_capacity must be >= 1")
        if self.ports < 1:
            raise ConfigError("ports must be >= 1")
        if self.monitor_window <= 0:
            raise ConfigError("monitor_window must be > 0")
        if self.penalty_us < 0:
            raise ConfigError("penalty_us must be >= 0")
        bad = set(self.emit) - EVENT_KINDS
        if bad:
            raise ConfigError(f"unknown event kinds in emit: {sorted(bad)}")
        object.__setattr__(self, "emit", frozenset(self.emit))
        for p in self.vf_table:
            if p.frequency != int(p.frequency):
                raise ConfigError("VF table frequencies must be whole MHz")

    @property
    def reference_mhz(self) -> float:
        return self.vf_table.top.frequency

    @property
    def duration_us(self) -> float:
        return self.sim_length / self.reference_mhz

    def with_(self, **changes) -> "NpuConfig":
        return replace(self, **changes)


# --- flat config files ----------------------------------------------------------

def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    with open(path) as fh:
        return parse_config_text(fh.read())


def _int(key: str, v: str) -> int:
    try:
        f = float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {v!r}") from None
    if not f.is_integer():
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return int(f)


def _float(key: str, v: str) -> float:
    try:
        f = float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None
    if not math.isfinite(f):
        raise ConfigError(f"{key}: expected a finite number")
    return f


def _list(v: str) -> list[str]:
    return [x for x in v.replace(",", " ").split() if x]


_ROLE_ALIASES = {"rx": RX, "receive": RX, "tx": TX, "transmit": TX}

_TOP_INT = {"num_mes", "threads_per_me", "ports", "sram_latency", "sdram_latency",
            "queue_capacity", "sim_length", "seed"}
_PROFILE_INT = {"compute_cycles", "sram_accesses", "sdram_accesses", "poll_cycles",
                "tx_cycles", "mem_chain"}
_POWER_FLOAT = {"k_dyn", "alpha_idle", "k_static", "adder_energy"}

NPU_KEYS = (_TOP_INT | {"role_map", "profile", "vf_table", "emit", "monitor_window_kcycles",
                        "dvs.penalty_us"}
            | {f"profile.{k}" for k in _PROFILE_INT} | {f"power.{k}" for k in _POWER_FLOAT})


def npu_config_from_mapping(mapping: Mapping[str, str], base: NpuConfig | None = None) -> NpuConfig:
    """Build an :class:`NpuConfig` from the NPU keys of a flat config mapping.

    Keys that are not NPU keys are ignored here; callers check for unknown keys.
    """
    cfg = base or NpuConfig()
    kw: dict = {}
    prof_kw: dict = {}
    power_kw: dict = {}
    for key, v in mapping.items():
        if key not in NPU_KEYS:
            continue
        if key in _TOP_INT:
            kw[key] = _int(key, v)
        elif key == "role_map":
            try:
                kw["role_map"] = tuple(_ROLE_ALIASES[r.lower()] for r in _list(v))
            except KeyError as e:
                raise ConfigError(f"role_map: unknown role {e.args[0]!r}") from None
        elif key == "profile":
            if v not in BUILTIN_PROFILES:
                raise ConfigError(f"profile: unknown benchmark {v!r}; expected one of {sorted(BUILTIN_PROFILES)}")
            kw["profile"] = BUILTIN_PROFILES[v]
        elif key == "vf_table":
            kw["vf_table"] = VfTable.from_frequencies(_float(key, f) for f in _list(v))
        elif key == "emit":
            kinds = frozenset(_list(v))
            if kinds - EVENT_KINDS:
                raise ConfigError(f"emit: unknown event kinds {sorted(kinds - EVENT_KINDS)}")
            kw["emit"] = kinds
        elif key == "monitor_window_kcycles":
            kw["monitor_window"] = int(round(_float(key, v) * 1000))
        elif key == "dvs.penalty_us":
            kw["penalty_us"] = _float(key, v)
        elif key.startswith("profile."):
            prof_kw[key.split(".", 1)[1]] = _int(key, v)
        else:
            power_kw[key.split(".", 1)[1]] = _float(key, v)
    profile = kw.pop("profile", cfg.profile)
    if prof_kw:
        profile = replace(profile, name="custom", **prof_kw)
    power = replace(cfg.power, **power_kw) if power_kw else cfg.power
    try:
        return replace(cfg, profile=profile, power=power, **kw)
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None
