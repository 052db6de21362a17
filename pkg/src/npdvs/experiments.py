"""Run specs, TDVS/EDVS parameter sweeps and policy comparisons."""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

from .dvs_policies import EDVS_WINDOWS, TDVS_THRESHOLDS, TDVS_WINDOWS, EdvsPolicy, TdvsPolicy
from .loc import analyze_many, parse_formula, percentile_cut
from .npu_sim.config import (
    BUILTIN_PROFILES,
    NPU_KEYS,
    ConfigError,
    NpuConfig,
    npu_config_from_mapping,
    parse_config_text,
)
from .npu_sim.simulator import SimResult, run_simulation
from .traffic_gen import (
    DEFAULT_PACKET_BITS,
    NAMED_RATES,
    Packet,
    Segment,
    TrafficError,
    TrafficProfile,
    generate,
    import_csv,
)

# average power over every 100 forwarded packets, and forwarding rate in Mbps
# (time is in us, so bits/us is already Mbps)
_POWER_EXPR = "(energy(forward[i+100]) - energy(forward[i])) / (time(forward[i+100]) - time(forward[i]))"
_TPUT_EXPR = "(total_bit(forward[i+100]) - total_bit(forward[i])) / (time(forward[i+100]) - time(forward[i]))"
POWER_PERIOD = "{0.5, 2.25, 0.01}"
TPUT_PERIOD = "{100, 3300, 10}"
POWER100 = f"{_POWER_EXPR} |> {POWER_PERIOD}"
TPUT100 = f"{_TPUT_EXPR} <| {TPUT_PERIOD}"
SHORTHANDS = {"power100": POWER100, "tput100": TPUT100}

# percentile readouts: p of instances lower than a power, p of instances above a rate
SWEEP_POWER = f"{_POWER_EXPR} <| {POWER_PERIOD}"
SWEEP_TPUT = f"{_TPUT_EXPR} |> {TPUT_PERIOD}"
SWEEP_POWER_F = parse_formula(SWEEP_POWER)
SWEEP_TPUT_F = parse_formula(SWEEP_TPUT)

POLICIES = ("none", "tdvs", "edvs")


def resolve_formula(text: str) -> str:
    return SHORTHANDS.get(text.strip(), text)


# --- run specs ----------------------------------------------------------------

@dataclass(frozen=True)
class TrafficSpec:
    level: str = "medium"
    rate: float | None = None  # overrides the level's rate
    packet_bits: int = DEFAULT_PACKET_BITS
    arrival: str = "poisson"
    segments: tuple[Segment, ...] | None = None
    csv: str | None = None

    def profile(self, duration_us: float, seed: int) -> TrafficProfile:
        if self.segments:
            segs = self.segments
        else:
            if self.level not in NAMED_RATES:
                raise ConfigError(f"traffic.level: unknown level {self.level!r}; expected one of {sorted(NAMED_RATES)}")
            rate = NAMED_RATES[self.level] if self.rate is None else self.rate
            segs = (Segment(duration_us, rate),)
        return TrafficProfile(segs, ((self.packet_bits, 1.0),), self.arrival, seed)

    def arrivals(self, duration_us: float, seed: int) -> list[Packet]:
        if self.csv:
            return import_csv(self.csv)
        return generate(self.profile(duration_us, seed))


@dataclass(frozen=True)
class RunSpec:
    npu: NpuConfig = NpuConfig()
    policy: str = "none"
    top_threshold: float = 1000.0
    tdvs_window: int = 40_000
    idle_threshold: float = 0.10
    edvs_window: int = 40_000
    traffic: TrafficSpec = TrafficSpec()

    def make_policy(self):
        table = self.npu.vf_table
        if self.policy == "tdvs":
            return TdvsPolicy(self.top_threshold, self.tdvs_window, table)
        if self.policy == "edvs":
            return EdvsPolicy(self.idle_threshold, self.edvs_window, table)
        if self.policy == "none":
            return None
        raise ConfigError(f"dvs.policy: unknown policy {self.policy!r}; expected one of {list(POLICIES)}")

    def with_(self, **changes) -> "RunSpec":
        return replace(self, **changes)


RUN_KEYS = frozenset({
    "dvs.policy", "tdvs.top_threshold_mbps", "tdvs.window_kcycles", "edvs.idle_threshold",
    "edvs.window_kcycles", "traffic.level", "traffic.rate_mbps", "traffic.packet_bits",
    "traffic.arrival", "traffic.segments", "traffic.csv",
})


def _kcycles(key: str, v: str) -> int:
    try:
        k = float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None
    if not math.isfinite(k) or k <= 0:
        raise ConfigError(f"{key}: must be > 0")
    return int(round(k * 1000))


def _number(key: str, v: str) -> float:
    try:
        x = float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"{key}: expected a finite number")
    return x


def _segments(v: str) -> tuple[Segment, ...]:
    # "duration_us:rate_mbps, duration_us:rate_mbps, ..."
    out = []
    for part in v.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            d, r = part.split(":")
            out.append(Segment(float(d), float(r)))
        except (ValueError, TrafficError) as e:
            raise ConfigError(f"traffic.segments: bad segment {part!r} ({e})") from None
    if not out:
        raise ConfigError("traffic.segments: no segments given")
    return tuple(out)


def run_spec_from_mapping(mapping: Mapping[str, str], base: RunSpec | None = None) -> RunSpec:
    base = base or RunSpec()
    for key in mapping:
        if key not in NPU_KEYS and key not in RUN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    npu = npu_config_from_mapping(mapping, base.npu)
    kw: dict = {}
    tkw: dict = {}
    for key, v in mapping.items():
        if key == "dvs.policy":
            if v not in POLICIES:
                raise ConfigError(f"dvs.policy: unknown policy {v!r}; expected one of {list(POLICIES)}")
            kw["policy"] = v
        elif key == "tdvs.top_threshold_mbps":
            kw["top_threshold"] = _number(key, v)
        elif key == "tdvs.window_kcycles":
            kw["tdvs_window"] = _kcycles(key, v)
        elif key == "edvs.idle_threshold":
            kw["idle_threshold"] = _number(key, v)
        elif key == "edvs.window_kcycles":
            kw["edvs_window"] = _kcycles(key, v)
        elif key == "traffic.level":
            if v not in NAMED_RATES:
                raise ConfigError(f"traffic.level: unknown level {v!r}; expected one of {sorted(NAMED_RATES)}")
            tkw["level"] = v
        elif key == "traffic.rate_mbps":
            tkw["rate"] = _number(key, v)
        elif key == "traffic.packet_bits":
            bits = _number(key, v)
            if not bits.is_integer() or bits <= 0:
                raise ConfigError("traffic.packet_bits: expected a positive integer")
            tkw["packet_bits"] = int(bits)
        elif key == "traffic.arrival":
            if v not in ("poisson", "uniform"):
                raise ConfigError(f"traffic.arrival: expected poisson or uniform, got {v!r}")
            tkw["arrival"] = v
        elif key == "traffic.segments":
            tkw["segments"] = _segments(v)
        elif key == "traffic.csv":
            tkw["csv"] = v
    traffic = replace(base.traffic, **tkw) if tkw else base.traffic
    spec = replace(base, npu=npu, traffic=traffic, **kw)
    try:
        spec.make_policy()
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return spec


def load_run_spec(path: str | os.PathLike | None = None, text: str | None = None,
                  base: RunSpec | None = None) -> RunSpec:
    if path is not None:
        with open(path) as fh:
            text = fh.read()
    return run_spec_from_mapping(parse_config_text(text or ""), base)


def simulate(spec: RunSpec, arrivals: Sequence[Packet] | None = None) -> SimResult:
    if arrivals is None:
        arrivals = spec.traffic.arrivals(spec.npu.duration_us, spec.npu.seed)
    return run_simulation(spec.npu, arrivals, spec.make_policy())


# --- sweeps ------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    policy: str = "tdvs"
    thresholds: tuple[float, ...] = tuple(float(t) for t in TDVS_THRESHOLDS)
    windows: tuple[int, ...] = TDVS_WINDOWS
    seeds: tuple[int, ...] = (0,)
    p: float = 0.8
    base: RunSpec = RunSpec()

    def __post_init__(self):
        if self.policy not in ("tdvs", "edvs"):
            raise ConfigError("sweep policy must be tdvs or edvs")
        if not self.thresholds or not self.windows or not self.seeds:
            raise ConfigError("sweep axes must be non-empty")
        if not 0 < self.p < 1:
            raise ConfigError("percentile p must be in (0, 1)")

    @classmethod
    def edvs_default(cls, **kw) -> "SweepSpec":
        return cls(policy="edvs", thresholds=(0.10,), windows=EDVS_WINDOWS, **kw)


@dataclass
class SweepRow:
    policy: str
    threshold: float | None
    window: int | None
    seed: int | None  # None on seed-averaged rows
    p_power: float | None  # W; None when the cut falls outside the analysis grid
    p_throughput: float | None  # Mbps
    mean_power: float
    mean_throughput: float
    transitions: float
    drops: float

    FIELDS = ("policy", "threshold", "window", "seed", "p_power", "p_throughput",
              "mean_power", "mean_throughput", "transitions", "drops")

    def cells(self) -> list[str]:
        def f(x, fmt):
            return "" if x is None else format(x, fmt)
        return [self.policy, f(self.threshold, "g"), f(self.window, "d"), f(self.seed, "d"),
                f(self.p_power, "g"), f(self.p_throughput, "g"), f"{self.mean_power:.6f}",
                f"{self.mean_throughput:.3f}", f(self.transitions, "g"), f(self.drops, "g")]


def _mean(xs):
    xs = list(xs)
    if any(x is None for x in xs):
        return None
    return sum(xs) / len(xs)


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow] = field(default_factory=list)

    @property
    def baselines(self) -> list[SweepRow]:
        return [r for r in self.rows if r.policy == "none"]

    def grid(self) -> list[SweepRow]:
        return [r for r in self.rows if r.policy != "none"]

    def averaged(self) -> list[SweepRow]:
        """One seed-averaged row per grid point, baseline first."""
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r.policy, r.threshold, r.window), []).append(r)
        out = []
        for (pol, thr, win), rs in groups.items():
            out.append(SweepRow(
                pol, thr, win, None,
                _mean(r.p_power for r in rs), _mean(r.p_throughput for r in rs),
                _mean(r.mean_power for r in rs), _mean(r.mean_throughput for r in rs),
                _mean(r.transitions for r in rs), _mean(r.drops for r in rs)))
        return out

    def point(self, threshold, window) -> SweepRow:
        for r in self.averaged():
            if r.policy != "none" and r.threshold == threshold and r.window == window:
                return r
        raise KeyError((threshold, window))

    def baseline(self) -> SweepRow:
        return next(r for r in self.averaged() if r.policy == "none")

    def to_csv(self, averaged: bool = False) -> str:
        rows = self.averaged() if averaged else self.rows
        lines = [",".join(SweepRow.FIELDS)]
        lines += [",".join(r.cells()) for r in rows]
        return "\n".join(lines) + "\n"

    def to_gnuplot(self, column: str = "p_power") -> str:
        """Seed-averaged surface: ``threshold window value`` blocks, one per threshold."""
        if column not in SweepRow.FIELDS[4:]:
            raise ValueError(f"unknown sweep column {column!r}")
        buf = io.StringIO()
        buf.write(f"# threshold window {column}\n")
        avg = [r for r in self.averaged() if r.policy != "none"]
        for thr in self.spec.thresholds:
            for r in avg:
                if r.threshold == thr:
                    v = getattr(r, column)
                    buf.write(f"{thr:g} {r.window} {'nan' if v is None else format(v, 'g')}\n")
            buf.write("\n")
        return buf.getvalue()


def measure(result: SimResult, p: float) -> tuple[float | None, float | None]:
    """(p-percentile power, p-percentile throughput) from a run's forward events."""
    power, tput = analyze_many([SWEEP_POWER_F, SWEEP_TPUT_F], result.trace)
    return percentile_cut(power, p), percentile_cut(tput, p)



def _row(policy, thr, win, seed, result: SimResult, p: float) -> SweepRow:
    pp, pt = measure(result, p)
    s = result.stats
    return SweepRow(policy, thr, win, seed, pp, pt, s.mean_power, s.throughput,
                    sum(s.vf_transitions), s.dropped_packets)


def run_sweep(spec: SweepSpec, progress: Callable[[str], None] | None = None) -> SweepResult:
    """Baseline plus every (threshold, window) point for each seed.

    Only ``forward`` events are recorded; the percentile formulas need nothing else.
    """
    base = spec.base
    out = SweepResult(spec)
    arrivals = {}
    for seed in spec.seeds:
        npu = base.npu.with_(seed=seed, emit=frozenset({"forward"}))
        arrivals[seed] = (npu, base.traffic.arrivals(npu.duration_us, seed))
    for seed in spec.seeds:
        npu, arr = arrivals[seed]
        res = run_simulation(npu, arr, None)
        out.rows.append(_row("none", None, None, seed, res, spec.p))
        if progress:
            progress(f"baseline seed={seed}")
    for thr in spec.thresholds:
        for win in spec.windows:
            for seed in spec.seeds:
                npu, arr = arrivals[seed]
                if spec.policy == "tdvs":
                    pol = TdvsPolicy(thr, win, npu.vf_table)
                else:
                    pol = EdvsPolicy(thr, win, npu.vf_table)
                res = run_simulation(npu, arr, pol)
                out.rows.append(_row(spec.policy, thr, win, seed, res, spec.p))
                if progress:
                    progress(f"{spec.policy} threshold={thr:g} window={win} seed={seed}")
    return out


# --- policy comparison ------------------------------------------------------------

@dataclass(frozen=True)
class CompareSpec:
    benchmarks: tuple[str, ...] = tuple(BUILTIN_PROFILES)
    levels: tuple[str, ...] = ("high", "medium", "low")
    tdvs: TdvsPolicy = TdvsPolicy(1000.0, 80_000)  # performance-first pick
    edvs: EdvsPolicy = EdvsPolicy(0.10, 40_000)
    seeds: tuple[int, ...] = (0,)
    base: RunSpec = RunSpec()

    def __post_init__(self):
        for b in self.benchmarks:
            if b not in BUILTIN_PROFILES:
                raise ConfigError(f"unknown benchmark {b!r}; expected one of {sorted(BUILTIN_PROFILES)}")
        for lv in self.levels:
            if lv not in NAMED_RATES:
                raise ConfigError(f"unknown traffic level {lv!r}; expected one of {sorted(NAMED_RATES)}")
        if not self.seeds:
            raise ConfigError("compare needs at least one seed")


@dataclass
class CompareRow:
    benchmark: str
    level: str
    policy: str
    mean_power: float  # W, seed-averaged
    energy: float  # uJ
    throughput: float  # Mbps
    power_saving: float  # fraction of baseline mean power
    throughput_loss: float  # fraction of baseline throughput

    FIELDS = ("benchmark", "level", "policy", "mean_power", "energy", "throughput",
              "power_saving", "throughput_loss")

    def cells(self) -> list[str]:
        return [self.benchmark, self.level, self.policy, f"{self.mean_power:.6f}",
                f"{self.energy:.3f}", f"{self.throughput:.3f}", f"{self.power_saving:.6f}",
                f"{self.throughput_loss:.6f}"]


def compare_cell(spec: CompareSpec, benchmark: str, level: str) -> list[CompareRow]:
    """Baseline, TDVS and EDVS rows for one benchmark at one traffic level."""
    sums = {k: [0.0, 0.0, 0.0] for k in POLICIES}
    for seed in spec.seeds:
        npu = spec.base.npu.with_(profile=BUILTIN_PROFILES[benchmark], seed=seed,
                                  emit=frozenset())
        traffic = replace(spec.base.traffic, level=level, rate=None, segments=None, csv=None)
        arr = traffic.arrivals(npu.duration_us, seed)
        for name, pol in (("none", None), ("tdvs", spec.tdvs), ("edvs", spec.edvs)):
            s = run_simulation(npu, arr, pol).stats
            acc = sums[name]
            acc[0] += s.mean_power
            acc[1] += s.total_energy
            acc[2] += s.throughput
    n = len(spec.seeds)
    bp, _, bt = (x / n for x in sums["none"])
    rows = []
    for name in POLICIES:
        p, e, t = (x / n for x in sums[name])
        rows.append(CompareRow(benchmark, level, name, p, e, t, 1 - p / bp,
                               (1 - t / bt) if bt > 0 else 0.0))
    return rows


def run_compare(spec: CompareSpec, progress: Callable[[str], None] | None = None) -> list[CompareRow]:
    rows: list[CompareRow] = []
    for b in spec.benchmarks:
        for lv in spec.levels:
            rows += compare_cell(spec, b, lv)
            if progress:
                progress(f"{b} {lv}")
    return rows


def compare_csv(rows: Sequence[CompareRow]) -> str:
    lines = [",".join(CompareRow.FIELDS)] + [",".join(r.cells()) for r in rows]
    return "\n".join(lines) + "\n"
