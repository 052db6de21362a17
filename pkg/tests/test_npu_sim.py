import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from npdvs.dvs_policies import EdvsPolicy, TdvsPolicy
from npdvs.loc import check
from npdvs.npu_sim import (
    BUILTIN_PROFILES,
    ConfigError,
    NpuConfig,
    NpuSimulator,
    WorkloadProfile,
    npu_config_from_mapping,
    parse_config_text,
    power_levels,
    run_simulation,
)
from npdvs.trace_model import CUMULATIVE_KEYS, write_trace
from npdvs.traffic_gen import Packet, Segment, TrafficProfile, generate, named_profile

SHORT = NpuConfig(sim_length=600_000)  # 1 ms


def arrivals(rate, duration, seed=0, arrival="poisson"):
    return generate(TrafficProfile((Segment(duration, rate),), arrival=arrival, seed=seed))


def trace_text(trace):
    buf = io.StringIO()
    write_trace(trace, buf)
    return buf.getvalue()


# --- config ---------------------------------------------------------------------

def test_defaults():
    c = NpuConfig()
    assert c.role_map == ("rx",) * 4 + ("tx",) * 2
    assert (c.num_mes, c.threads_per_me, c.ports) == (6, 4, 16)
    assert (c.sram_latency, c.sdram_latency, c.sim_length) == (26, 100, 8_000_000)
    assert c.duration_us == pytest.approx(8e6 / 600)


@pytest.mark.parametrize("kw", [
    dict(num_mes=0), dict(sim_length=0), dict(sram_latency=0), dict(role_map=("tx",) * 6),
    dict(role_map=("rx",) * 5), dict(emit={"bogus"}), dict(queue_capacity=0),
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        NpuConfig(**kw)


def test_profile_memory_ordering():
    mem = {k: p.memory_accesses for k, p in BUILTIN_PROFILES.items()}
    assert mem["nat"] == min(mem.values())
    assert min(mem["url"], mem["md4"]) > max(mem["ipfwdr"], mem["nat"])
    assert BUILTIN_PROFILES["nat"].sram_accesses == 1 and BUILTIN_PROFILES["nat"].sdram_accesses == 0


def test_config_text():
    m = parse_config_text("num_mes = 4  # fewer\nrole_map = rx rx rx tx\nprofile = nat\n"
                          "profile.poll_cycles = 4\npower.alpha_idle = 0.2\n")
    c = npu_config_from_mapping(m)
    assert c.num_mes == 4 and c.role_map == ("rx", "rx", "rx", "tx")
    assert c.profile.poll_cycles == 4 and c.profile.sram_accesses == 1
    assert c.power.alpha_idle == 0.2
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("a = 1\na = 2\n")
    with pytest.raises(ConfigError, match="profile"):
        npu_config_from_mapping({"profile": "nope"})
    with pytest.raises(ConfigError, match="num_mes"):
        npu_config_from_mapping({"num_mes": "2.5"})


# --- closed-form cases ----------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(BUILTIN_PROFILES))
@pytest.mark.parametrize("roles", [None, ("rx",) * 6])
def test_single_packet_latency(name, roles):
    p = BUILTIN_PROFILES[name]
    cfg = SHORT.with_(profile=p, role_map=roles)
    res = run_simulation(cfg, [Packet(0.0, 512, 0)])
    ev = [e for e in res.trace if e.name in ("fifo", "forward")]
    assert [e.name for e in ev] == ["fifo", "forward"]
    expected = p.compute_cycles + p.sram_accesses * 26 + p.sdram_accesses * 100
    assert ev[1]["cycle"] - ev[0]["cycle"] == expected


def test_empty_workload():
    res = run_simulation(NpuConfig(sim_length=1_000_000), [])
    s = res.stats
    assert s.forwarded_packets == 0
    assert not [e for e in res.trace if e.name == "forward"]
    assert s.total_energy > 0
    assert sum(s.vf_transitions) == 0
    # every thread polls, so all six MEs burn busy power
    assert s.mean_power == pytest.approx(1.5)


def test_stall_energy_uses_new_point():
    cfg = NpuConfig(sim_length=60_000, emit=frozenset())
    sim = NpuSimulator(cfg, [])
    sim.apply_vf_change(sim.mes[0], 4, 0)
    assert not sim.apply_vf_change(sim.mes[0], 4, 0)
    s = sim.run().stats
    busy_top, _, _ = power_levels()[0]
    busy_low, idle_low, _ = power_levels()[4]
    dur = 100.0
    expected = 5 * busy_top * dur + idle_low * 10 + busy_low * (dur - 10)
    assert s.total_energy == pytest.approx(expected, rel=1e-9)
    assert s.vf_transitions == [1, 0, 0, 0, 0, 0]
    assert s.stalled_cycles[0] == 6000  # 10 us of reference clock
    assert s.final_levels[0] == 4


def test_stall_is_ten_microseconds_per_transition():
    cfg = NpuConfig(sim_length=1_200_000)
    res = run_simulation(cfg, arrivals(400, cfg.duration_us), TdvsPolicy(1000, 20_000))
    s = res.stats
    # low traffic: four steps down to 400 MHz, then it stays there
    assert s.final_levels == [4] * 6
    assert s.vf_transitions == [4] * 6
    assert s.stalled_cycles == [4 * 6000] * 6


def test_dvs_disabled_has_no_transitions():
    res = run_simulation(SHORT, arrivals(900, SHORT.duration_us))
    assert sum(res.stats.vf_transitions) == 0
    assert all(w.level == 0 for w in res.stats.windows)


def test_memory_free_profile_never_idle():
    p = WorkloadProfile("nomem", compute_cycles=1200, sram_accesses=0, sdram_accesses=0)
    res = run_simulation(SHORT.with_(profile=p), arrivals(1400, SHORT.duration_us))
    assert all(w.idle == 0 for w in res.stats.windows)
    assert all(e["idle_frac"] == 0 for e in res.trace if e.name.endswith("_idle"))


def test_pipeline_events_when_busy():
    cfg = NpuConfig(sim_length=1000, emit=frozenset({"pipeline"}))
    res = run_simulation(cfg, [])
    names = [e.name for e in res.trace]
    assert names.count("m0_pipeline") == 1000
    assert set(names) == {f"m{k}_pipeline" for k in range(6)}


def test_drops_when_buffer_full():
    cfg = SHORT.with_(queue_capacity=8)
    res = run_simulation(cfg, arrivals(3000, cfg.duration_us))
    s = res.stats
    assert s.dropped_packets > 0
    # whatever was accepted but not yet forwarded fits in the buffer
    assert 0 <= s.arrived_packets - s.dropped_packets - s.forwarded_packets <= 8
    assert res.trace.events[-1]["p_loss"] <= s.dropped_packets


def test_deterministic_bytes():
    arr = arrivals(900, SHORT.duration_us, seed=4)
    a = run_simulation(SHORT, arr, EdvsPolicy(0.1, 20_000))
    b = run_simulation(SHORT, arr, EdvsPolicy(0.1, 20_000))
    assert trace_text(a.trace) == trace_text(b.trace)
    assert a.stats.csv_row() == b.stats.csv_row()


def test_rejects_unsorted_arrivals():
    with pytest.raises(ValueError):
        run_simulation(SHORT, [Packet(2.0, 512, 0), Packet(1.0, 512, 1)])


# --- invariants ---------------------------------------------------------------------

policies = st.sampled_from([
    None, TdvsPolicy(800, 20_000), TdvsPolicy(1000, 40_000), TdvsPolicy(1400, 20_000),
    EdvsPolicy(0.1, 20_000), EdvsPolicy(0.3, 40_000),
])


@given(policies, st.sampled_from(sorted(BUILTIN_PROFILES)), st.sampled_from([200, 900, 1400, 2500]),
       st.integers(0, 50))
@settings(max_examples=25, deadline=None)
def test_run_invariants(policy, profile, rate, seed):
    cfg = NpuConfig(sim_length=300_000, profile=BUILTIN_PROFILES[profile], queue_capacity=64)
    arr = arrivals(rate, cfg.duration_us, seed)
    res = run_simulation(cfg, arr, policy)
    s = res.stats
    events = res.trace.events
    for key in CUMULATIVE_KEYS:
        vals = [e[key] for e in events]
        assert vals == sorted(vals), key
    assert s.forwarded_packets + s.dropped_packets <= s.arrived_packets
    fwd = [e for e in events if e.name == "forward"]
    assert len(fwd) == s.forwarded_packets
    if fwd:
        assert fwd[-1]["total_bit"] == s.forwarded_bits
        assert fwd[-1]["total_pkt"] == s.forwarded_packets
    assert check("energy(forward[i+1]) - energy(forward[i]) >= 0", res.trace).ok
    # power between any two events stays within six busy MEs plus monitor cost
    pmax = 6 * 0.25 + 0.01
    for a, b in zip(fwd, fwd[100::100]):
        if b["time"] > a["time"]:
            assert 0 <= (b["energy"] - a["energy"]) / (b["time"] - a["time"]) <= pmax
    window = policy.window if policy is not None else cfg.monitor_window
    for w in s.windows:
        assert w.length == pytest.approx(window)
        assert 0 <= w.idle_frac <= 1
    for w in s.windows:
        assert 0 <= w.level <= 4
    assert s.total_energy > 0
    assert s.overhead_energy <= s.total_energy


def test_named_traffic_runs():
    cfg = SHORT
    arr = generate(named_profile("high", cfg.duration_us))
    res = run_simulation(cfg, arr)
    assert res.stats.throughput > 900
