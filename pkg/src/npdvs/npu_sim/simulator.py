"""Event-driven NPU model with per-ME voltage/frequency and energy accounting.

Time is kept in integer ticks: one microsecond is the LCM of the VF table's
frequencies (198000 ticks for the 400..600 MHz table), so a clock cycle is a
whole number of ticks at every operating point and runs are exactly
reproducible.

Each packet is received into a shared buffer (``fifo``), handled by a receive
ME thread (compute chunks interleaved with chains of SRAM/SDRAM accesses),
queued for a transmit ME, and forwarded (``forward``). A thread without a
packet spins in its poll loop, so an ME only goes idle when every thread is
blocked on memory.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

from ..dvs_policies import EdvsPolicy, TdvsPolicy
from ..trace_model import Trace, TraceEvent
from ..traffic_gen import Packet
from .config import RX, TX, NpuConfig
from .power import power_levels

TRACE_HEADER = ("cycle", "time", "energy", "total_pkt", "total_bit", "p_loss", "idle_frac")

BUSY, IDLE, STALLED = 0, 1, 2

# heap event kinds
_ARRIVE, _CHUNK, _MEM, _STALL_END, _WINDOW, _PIPE = range(6)


def ticks_per_us(config: NpuConfig) -> int:
    return reduce(math.lcm, (int(p.frequency) for p in config.vf_table))


@dataclass
class WindowStat:
    index: int
    me: int
    level: int  # VF level in force when the window closed
    busy: float  # reference cycles
    idle: float
    stalled: float

    @property
    def length(self) -> float:
        return self.busy + self.idle + self.stalled

    @property
    def idle_frac(self) -> float:
        return self.idle / self.length

    @property
    def stall_frac(self) -> float:
        return self.stalled / self.length


@dataclass
class SummaryStats:
    duration_us: float
    total_energy: float  # uJ, including monitor overhead
    overhead_energy: float  # uJ spent in the TDVS traffic adder
    arrived_packets: int
    arrived_bits: int
    forwarded_packets: int
    forwarded_bits: int
    dropped_packets: int
    vf_transitions: list[int]
    stalled_cycles: list[float]  # reference cycles per ME
    final_levels: list[int]
    windows: list[WindowStat] = field(default_factory=list, repr=False)

    @property
    def mean_power(self) -> float:
        """W; uJ per us."""
        return self.total_energy / self.duration_us

    @property
    def throughput(self) -> float:
        """Forwarded Mbps; bits per us."""
        return self.forwarded_bits / self.duration_us

    @property
    def offered(self) -> float:
        return self.arrived_bits / self.duration_us

    CSV_FIELDS = ("duration_us", "total_energy_uj", "overhead_energy_uj", "mean_power_w",
                  "throughput_mbps", "arrived_packets", "forwarded_packets", "forwarded_bits",
                  "dropped_packets", "vf_transitions", "stalled_cycles")

    def csv_row(self) -> list[str]:
        return [
            f"{self.duration_us:.3f}", f"{self.total_energy:.6f}", f"{self.overhead_energy:.6f}",
            f"{self.mean_power:.6f}", f"{self.throughput:.3f}", str(self.arrived_packets),
            str(self.forwarded_packets), str(self.forwarded_bits), str(self.dropped_packets),
            str(sum(self.vf_transitions)), f"{sum(self.stalled_cycles):.0f}",
        ]


@dataclass
class SimResult:
    trace: Trace
    stats: SummaryStats


class _Me:
    __slots__ = ("idx", "role", "forwards", "prog", "nthreads", "level", "period", "status",
                 "since", "ctr", "free", "memw", "ready", "running", "run_end", "gen", "stalled",
                 "stall_gen", "transitions", "stalled_ticks", "power", "pkt", "step", "rem")

    def __init__(self, idx, role, forwards, prog, nthreads, period, power):
        self.idx = idx
        self.role = role
        self.forwards = forwards  # completes packets by forwarding them
        self.prog = prog  # [(compute cycles, memory ticks after it), ...]
        self.nthreads = nthreads
        self.level = 0
        self.period = period  # ticks per cycle
        self.status = BUSY
        self.since = 0
        self.ctr = [0, 0, 0]
        self.free = list(range(nthreads - 1, -1, -1))
        self.memw = 0
        self.ready: deque[int] = deque()
        self.running = -1
        self.run_end = 0
        self.gen = 0
        self.stalled = False
        self.stall_gen = 0
        self.transitions = 0
        self.stalled_ticks = 0
        self.power = power
        self.pkt = [-1] * nthreads
        self.step = [0] * nthreads
        self.rem = [0] * nthreads


def _rx_program(config: NpuConfig, T: int, ref_period: int, with_tx: bool) -> list[tuple[int, int]]:
    prof = config.profile
    lat = ([config.sram_latency] * prof.sram_accesses + [config.sdram_latency] * prof.sdram_accesses)
    chains = [sum(lat[k:k + prof.mem_chain]) * ref_period for k in range(0, len(lat), prof.mem_chain)]
    n = len(chains) + 1
    base, extra = divmod(prof.rx_cycles, n)
    chunks = [base + (1 if k < extra else 0) for k in range(n)]
    if with_tx:
        chunks[-1] += prof.tx_cycles
    return list(zip(chunks, chains + [0]))


class NpuSimulator:
    def __init__(self, config: NpuConfig, arrivals: Sequence[Packet],
                 policy: TdvsPolicy | EdvsPolicy | None = None):
        self.config = config
        self.policy = policy
        if policy is not None and policy.vf_table != config.vf_table:
            raise ValueError("policy and NPU config use different VF tables")
        T = self.T = ticks_per_us(config)
        table = config.vf_table
        self.freqs = [int(p.frequency) for p in table]
        self.ref_period = T // self.freqs[0]
        self.pw = power_levels(table, config.power)
        self.end = config.sim_length * self.ref_period
        self.penalty = round(config.penalty_us * T)

        prev = -1
        times = []
        for p in arrivals:
            tk = round(p.time * T)
            if tk < prev:
                raise ValueError("arrivals must be sorted by time")
            prev = tk
            times.append(tk)
        self.arr_ticks = times
        self.arr_size = [p.size for p in arrivals]

        has_tx = TX in config.role_map
        rx_prog = _rx_program(config, T, self.ref_period, with_tx=not has_tx)
        tx_prog = [(config.profile.tx_cycles, 0)]
        self.mes: list[_Me] = []
        for k, role in enumerate(config.role_map):
            prog = rx_prog if role == RX else tx_prog
            forwards = role == TX or not has_tx
            self.mes.append(_Me(k, role, forwards, prog, config.threads_per_me,
                                T // self.freqs[0], self.pw[0][BUSY]))
        self.rx = [m for m in self.mes if m.role == RX]
        self.tx = [m for m in self.mes if m.role == TX]
        self.rr_rx = 0
        self.rr_tx = 0

        self.heap: list = []
        self.seq = 0
        self.inq: deque[int] = deque()
        self.txq: deque[int] = deque()
        self.in_system = 0
        self.energy = 0.0  # uJ up to self.last
        self.last = 0
        self.ptotal = sum(m.power for m in self.mes)
        self.overhead = 0.0
        self.fwd_pkts = 0
        self.fwd_bits = 0
        self.arrived = 0
        self.arrived_bits = 0
        self.drops = 0
        self.win_bits = 0
        self.chip_level = 0
        self.windows: list[WindowStat] = []
        self.events: list[TraceEvent] = []
        emit = config.emit
        self.emit_fifo = "fifo" in emit
        self.emit_forward = "forward" in emit
        self.emit_idle = "idle" in emit
        self.emit_pipeline = "pipeline" in emit
        self.tdvs = isinstance(policy, TdvsPolicy)
        self.edvs = isinstance(policy, EdvsPolicy)
        self.window = (policy.window if policy is not None else config.monitor_window) * self.ref_period

    # --- bookkeeping -----------------------------------------------------------

    def _push(self, t, kind, a=0, b=0):
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, kind, a, b))

    def _accrue(self, now):
        self.energy += self.ptotal * (now - self.last) / self.T
        self.last = now

    def _update(self, me: _Me, now: int) -> None:
        if me.stalled:
            st = STALLED
        elif me.memw == me.nthreads:
            st = IDLE
        else:
            st = BUSY
        if st != me.status:
            me.ctr[me.status] += now - me.since
            me.since = now
            me.status = st
        p = self.pw[me.level][st]
        if p != me.power:
            self._accrue(now)
            me.power = p
            self.ptotal = sum(m.power for m in self.mes)

    def _emit(self, name: str, now: int, idle: float = 0.0) -> None:
        e = self.energy + self.ptotal * (now - self.last) / self.T
        self.events.append(TraceEvent(name, {
            "cycle": float(now // self.ref_period),
            "time": round(now / self.T, 3),
            "energy": round(e, 6),
            "total_pkt": float(self.fwd_pkts),
            "total_bit": float(self.fwd_bits),
            "p_loss": float(self.drops),
            "idle_frac": round(idle, 4),
        }))

    # --- threads and pipeline ---------------------------------------------------

    def _issue(self, me: _Me, now: int) -> None:
        if me.running < 0 and me.ready and not me.stalled:
            t = me.ready.popleft()
            me.running = t
            me.run_end = now + me.rem[t] * me.period
            me.gen += 1
            self._push(me.run_end, _CHUNK, me.idx, me.gen)

    def _start_packet(self, me: _Me, t: int, pkt: int, now: int) -> None:
        me.pkt[t] = pkt
        me.step[t] = 0
        me.rem[t] = me.prog[0][0]
        self._start_step(me, t, now)

    def _start_step(self, me: _Me, t: int, now: int) -> None:
        if me.rem[t] > 0:
            me.ready.append(t)
        else:
            self._end_compute(me, t, now)

    def _end_compute(self, me: _Me, t: int, now: int) -> None:
        lat = me.prog[me.step[t]][1]
        if lat:
            me.memw += 1
            self._push(now + lat, _MEM, me.idx, t)
        else:
            self._finish_packet(me, t, now)

    def _finish_packet(self, me: _Me, t: int, now: int) -> None:
        pkt = me.pkt[t]
        me.pkt[t] = -1
        if me.forwards:
            self._forward(pkt, now)
        else:
            self.txq.append(pkt)
            self._dispatch(self.tx, self.txq, now, rx=False)
        q = self.inq if me.role == RX else self.txq
        if q and not me.stalled:
            self._start_packet(me, t, q.popleft(), now)
        else:
            me.free.append(t)

    def _dispatch(self, group: list[_Me], q: deque, now: int, rx: bool) -> None:
        n = len(group)
        while q:
            start = self.rr_rx if rx else self.rr_tx
            best = -1
            most = 0
            for j in range(n):
                k = (start + j) % n
                m = group[k]
                if not m.stalled and len(m.free) > most:
                    best, most = k, len(m.free)
            if best < 0:
                return
            if rx:
                self.rr_rx = (best + 1) % n
            else:
                self.rr_tx = (best + 1) % n
            me = group[best]
            self._start_packet(me, me.free.pop(), q.popleft(), now)
            self._issue(me, now)
            self._update(me, now)

    def _forward(self, pkt: int, now: int) -> None:
        self.fwd_pkts += 1
        self.fwd_bits += self.arr_size[pkt]
        self.in_system -= 1
        if self.emit_forward:
            self._emit("forward", now)

    # --- voltage/frequency ---------------------------------------------------------

    def apply_vf_change(self, me: _Me, level: int, now: int) -> bool:
        """Move ``me`` to ``level``; the ME then stalls for the scaling penalty."""
        if level == me.level:
            return False
        if not 0 <= level < len(self.freqs):
            raise ValueError(f"VF level {level} outside table")
        if me.running >= 0 and me.run_end > now:
            t = me.running
            me.rem[t] = -(-(me.run_end - now) // me.period)
            me.ready.appendleft(t)
            me.running = -1
            me.gen += 1
        me.level = level
        me.period = self.T // self.freqs[level]
        me.transitions += 1
        if self.penalty > 0:
            if not me.stalled:
                me.stalled = True
            me.stall_gen += 1
            self._push(now + self.penalty, _STALL_END, me.idx, me.stall_gen)
        self._update(me, now)
        self._issue(me, now)
        return True

    def _stall_end(self, me: _Me, gen: int, now: int) -> None:
        if gen != me.stall_gen or not me.stalled:
            return
        me.stalled = False
        if me.role == RX:
            self._dispatch(self.rx, self.inq, now, rx=True)
        else:
            self._dispatch(self.tx, self.txq, now, rx=False)
        self._issue(me, now)
        self._update(me, now)

    def _window(self, index: int, now: int) -> None:
        W = self.window
        rp = self.ref_period
        idle_fracs = []
        for me in self.mes:
            me.ctr[me.status] += now - me.since
            me.since = now
            busy, idle, stl = me.ctr
            me.stalled_ticks += stl
            self.windows.append(WindowStat(index, me.idx, me.level, busy / rp, idle / rp, stl / rp))
            frac = idle / W
            idle_fracs.append(frac)
            me.ctr = [0, 0, 0]
            if self.emit_idle:
                self._emit(f"m{me.idx}_idle", now, frac)
        if self.tdvs:
            rate = self.win_bits / (W / self.T)
            decision = self.policy.decide(rate, self.chip_level)
            if decision.level != self.chip_level:
                self.chip_level = decision.level
                for me in self.mes:
                    self.apply_vf_change(me, decision.level, now)
        elif self.edvs:
            for me, frac in zip(self.mes, idle_fracs):
                decision = self.policy.decide(frac, me.level)
                self.apply_vf_change(me, decision.level, now)
        self.win_bits = 0

    # --- main loop --------------------------------------------------------------

    def run(self) -> SimResult:
        end = self.end
        if self.arr_ticks:
            self._push(self.arr_ticks[0], _ARRIVE, 0)
        if self.window < end:
            self._push(self.window, _WINDOW, 1)
        if self.emit_pipeline:
            for me in self.mes:
                self._push(0, _PIPE, me.idx)
        heap = self.heap
        mes = self.mes
        adder = self.config.power.adder_energy if self.tdvs else 0.0
        cap = self.config.queue_capacity
        n_arr = len(self.arr_ticks)
        while heap and heap[0][0] < end:
            now, _, kind, a, b = heapq.heappop(heap)
            if kind == _CHUNK:
                me = mes[a]
                if b != me.gen:
                    continue
                t = me.running
                me.running = -1
                me.rem[t] = 0
                self._end_compute(me, t, now)
                self._issue(me, now)
                self._update(me, now)
            elif kind == _MEM:
                me = mes[a]
                me.memw -= 1
                me.step[b] += 1
                me.rem[b] = me.prog[me.step[b]][0]
                self._start_step(me, b, now)
                self._issue(me, now)
                self._update(me, now)
            elif kind == _ARRIVE:
                size = self.arr_size[a]
                self.arrived += 1
                self.arrived_bits += size
                self.win_bits += size
                if adder:
                    self.energy += adder
                    self.overhead += adder
                if self.in_system >= cap:
                    self.drops += 1
                else:
                    self.in_system += 1
                    if self.emit_fifo:
                        self._emit("fifo", now)
                    self.inq.append(a)
                    self._dispatch(self.rx, self.inq, now, rx=True)
                if a + 1 < n_arr:
                    self._push(self.arr_ticks[a + 1], _ARRIVE, a + 1)
            elif kind == _WINDOW:
                self._window(a, now)
                nxt = now + self.window
                if nxt < end:
                    self._push(nxt, _WINDOW, a + 1)
            elif kind == _STALL_END:
                self._stall_end(mes[a], b, now)
            else:  # _PIPE
                me = mes[a]
                if me.status == BUSY:
                    self._emit(f"m{me.idx}_pipeline", now)
                self._push(now + me.period, _PIPE, a)

        self._accrue(end)
        for me in mes:
            me.ctr[me.status] += end - me.since
            me.since = end
            me.stalled_ticks += me.ctr[STALLED]
        rp = self.ref_period
        stats = SummaryStats(
            duration_us=end / self.T,
            total_energy=self.energy,
            overhead_energy=self.overhead,
            arrived_packets=self.arrived,
            arrived_bits=self.arrived_bits,
            forwarded_packets=self.fwd_pkts,
            forwarded_bits=self.fwd_bits,
            dropped_packets=self.drops,
            vf_transitions=[m.transitions for m in mes],
            stalled_cycles=[m.stalled_ticks / rp for m in mes],
            final_levels=[m.level for m in mes],
            windows=self.windows,
        )
        return SimResult(Trace(TRACE_HEADER, self.events), stats)


def run_simulation(config: NpuConfig, arrivals: Sequence[Packet],
                   policy: TdvsPolicy | EdvsPolicy | None = None) -> SimResult:
    """Simulate ``config.sim_length`` reference cycles of ``arrivals``.

    Returns the trace (events in simulation order) and summary statistics.
    """
    return NpuSimulator(config, arrivals, policy).run()
