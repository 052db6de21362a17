import csv
import io

import pytest

from npdvs import experiments as ex
from npdvs.cli import main
from npdvs.loc import analyze_distribution, percentile_cut
from npdvs.npu_sim import ConfigError, NpuConfig
from npdvs.trace_model import Trace, TraceEvent, read_trace, write_trace

SHORT = ex.RunSpec(npu=NpuConfig(sim_length=300_000))


@pytest.fixture
def cfg_file(tmp_path):
    def make(text):
        p = tmp_path / "run.cfg"
        p.write_text(text)
        return str(p)
    return make


def test_run_spec_keys():
    spec = ex.load_run_spec(text="""
        dvs.policy = tdvs
        tdvs.top_threshold_mbps = 1200
        tdvs.window_kcycles = 60
        traffic.level = low
        traffic.arrival = uniform
        sim_length = 100000
        seed = 7
    """)
    pol = spec.make_policy()
    assert (pol.kind, pol.top_threshold, pol.window) == ("tdvs", 1200, 60_000)
    assert spec.traffic.level == "low" and spec.traffic.arrival == "uniform"
    assert spec.npu.seed == 7 and spec.npu.sim_length == 100_000
    e = ex.load_run_spec(text="dvs.policy = edvs\nedvs.window_kcycles = 20\n").make_policy()
    assert (e.kind, e.window, e.idle_threshold) == ("edvs", 20_000, 0.1)


@pytest.mark.parametrize("text,needle", [
    ("dvs.polcy = tdvs", "dvs.polcy"),
    ("dvs.policy = magic", "dvs.policy"),
    ("traffic.level = extreme", "traffic.level"),
    ("tdvs.window_kcycles = -1", "tdvs.window_kcycles"),
    ("edvs.idle_threshold = 1.5\ndvs.policy = edvs", "idle threshold"),
    ("traffic.segments = 10", "traffic.segments"),
])
def test_run_spec_errors(text, needle):
    with pytest.raises(ConfigError, match=needle):
        ex.load_run_spec(text=text)


def test_segments_traffic():
    spec = ex.load_run_spec(text="traffic.segments = 100:1000, 100:0\ntraffic.arrival = uniform\n")
    arr = spec.traffic.arrivals(200.0, 0)
    assert arr and all(p.time < 100 for p in arr)


def test_power100_matches_raw_recomputation():
    res = ex.simulate(SHORT)
    d = analyze_distribution(ex.POWER100, res.trace)
    fwd = [e for e in res.trace if e.name == "forward"]
    vals = [(b["energy"] - a["energy"]) / (b["time"] - a["time"]) for a, b in zip(fwd, fwd[100:])]
    assert d.total_instances == len(vals)
    grid = d.period.grid()
    assert d.counts == [sum(1 for v in vals if v >= x) for x in grid]
    assert all(0 <= v <= 1.5 + 1e-9 for v in vals)


def test_too_few_forwards():
    ev = [TraceEvent("forward", {"time": float(k), "energy": float(k), "total_bit": 512.0 * k})
          for k in range(100)]
    d = analyze_distribution(ex.POWER100, Trace(("time", "energy", "total_bit"), ev))
    assert d.total_instances == 0 and d.not_evaluable == 100


def test_tput100_uniform_uncontended():
    spec = ex.RunSpec(npu=NpuConfig(sim_length=600_000),
                      traffic=ex.TrafficSpec(rate=1000.0, arrival="uniform"))
    d = analyze_distribution(ex.TPUT100, ex.simulate(spec).trace)
    lo = percentile_cut(d, 0.01)
    hi = percentile_cut(d, 0.99)
    assert 900 <= lo and hi <= 1100


def test_sweep_grid_and_determinism():
    spec = ex.SweepSpec(thresholds=(800.0, 1400.0), windows=(20_000, 40_000), seeds=(0, 1),
                        base=SHORT)
    a = ex.run_sweep(spec)
    assert len(a.rows) == 2 * 2 * 2 + 2
    assert len(a.averaged()) == 5
    b = ex.run_sweep(spec)
    assert a.to_csv() == b.to_csv()
    rows = list(csv.DictReader(io.StringIO(a.to_csv())))
    assert rows[0]["policy"] == "none"
    base = a.baseline()
    for r in a.averaged()[1:]:
        assert r.mean_power < base.mean_power
    surf = a.to_gnuplot("mean_power")
    assert len([ln for ln in surf.splitlines() if ln and not ln.startswith("#")]) == 4


def test_sweep_validation():
    with pytest.raises(ConfigError):
        ex.SweepSpec(p=1.0)
    with pytest.raises(ConfigError):
        ex.SweepSpec(windows=())
    with pytest.raises(ConfigError):
        ex.SweepSpec(policy="none")


def test_compare_rows():
    spec = ex.CompareSpec(benchmarks=("nat",), levels=("low",), base=SHORT)
    rows = ex.run_compare(spec)
    assert [(r.benchmark, r.level, r.policy) for r in rows] == [
        ("nat", "low", "none"), ("nat", "low", "tdvs"), ("nat", "low", "edvs")]
    assert rows[0].power_saving == 0 and rows[0].throughput_loss == 0
    assert abs(rows[2].power_saving) < 0.03
    out = ex.compare_csv(rows)
    assert out.splitlines()[0] == ",".join(ex.CompareRow.FIELDS)


# --- command line -------------------------------------------------------------------

def test_cli_simulate_check_analyze(tmp_path, cfg_file, capsys):
    cfg = cfg_file("sim_length = 200000\ndvs.policy = none\ntraffic.level = medium\n")
    t1, t2 = tmp_path / "a.trace", tmp_path / "b.trace"
    assert main(["simulate", "--config", cfg, "--out", str(t1), "--stats", str(tmp_path / "s.csv")]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(t2)]) == 0
    assert t1.read_bytes() == t2.read_bytes()
    last = read_trace(t1).materialize().events[-1]
    assert last["total_pkt"] > 0
    assert main(["check", "--trace", str(t1), "--formula",
                 "energy(forward[i+1]) - energy(forward[i]) >= 0"]) == 0
    out = tmp_path / "d.csv"
    assert main(["analyze", "--trace", str(t1), "--formula", "power100", "--out", str(out),
                 "--gnuplot", str(tmp_path / "d.dat")]) == 0
    assert "# operator: at_least" in out.read_text()
    assert main(["analyze", "--trace", str(t1), "--formula", "power100"]) == 0
    assert "bin_boundary,count,fraction" in capsys.readouterr().out


def test_cli_check_reports_violation(tmp_path, capsys):
    ev = []
    for i in range(12):
        ev.append(TraceEvent("enq", {"cycle": 100.0 * i}))
        ev.append(TraceEvent("deq", {"cycle": 100.0 * i + (70 if i == 7 else 30)}))
    p = tmp_path / "q.trace"
    write_trace(Trace(("cycle",), ev), p)
    rc = main(["check", "--trace", str(p), "--formula", "cycle(deq[i]) - cycle(enq[i]) <= 50"])
    assert rc == 1
    assert "i=7" in capsys.readouterr().out


def test_cli_errors(tmp_path, cfg_file, capsys):
    assert main(["simulate", "--config", cfg_file("bogus.key = 3\n")]) == 2
    assert "bogus.key" in capsys.readouterr().err
    p = tmp_path / "t.trace"
    write_trace(Trace(("cycle",), [TraceEvent("a", {"cycle": 1.0})]), p)
    assert main(["check", "--trace", str(p), "--formula", "power(a[i]) >= 0"]) == 2
    assert main(["check", "--trace", str(p), "--formula", "cycle(a[i]) >< {0, 1, 1}"]) == 2
    assert main(["check", "--trace", str(p), "--formula", "cycle(a[i] >= 0"]) == 2
    assert main(["check", "--trace", str(tmp_path / "missing"), "--formula", "cycle(a[i]) >= 0"]) == 2
    assert main(["nosuchcommand"]) == 2
    assert main(["check", "--formula", "cycle(a[i]) >= 0"]) == 2


def test_cli_sweep_and_compare(tmp_path, cfg_file):
    cfg = cfg_file("sim_length = 120000\n")
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", cfg, "--thresholds", "1000", "--windows", "20,40",
                 "--seeds", "0", "--out", str(out), "--quiet",
                 "--gnuplot", str(tmp_path / "s.dat")]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 3 and rows[1]["window"] == "20000"
    out2 = tmp_path / "cmp.csv"
    assert main(["compare", "--config", cfg, "--benchmarks", "ipfwdr", "--levels", "low",
                 "--out", str(out2), "--quiet"]) == 0
    assert len(out2.read_text().splitlines()) == 4
