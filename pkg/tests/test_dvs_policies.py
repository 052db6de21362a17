import pytest
from hypothesis import given
from hypothesis import strategies as st

from npdvs.dvs_policies import (
    DOWN,
    HOLD,
    UP,
    EdvsPolicy,
    MonitorWindow,
    TdvsPolicy,
    edvs_decide,
    tdvs_decide,
    tdvs_overhead_energy,
    threshold_for_level,
    window_rate,
)
from npdvs.vf import DEFAULT_VF_TABLE

FREQS = [600, 550, 500, 450, 400]


def test_threshold_ladder():
    assert [threshold_for_level(1000, f) for f in FREQS] == [1000, 916, 833, 750, 666]
    assert TdvsPolicy(1000).thresholds == [1000, 916, 833, 750, 666]
    assert threshold_for_level(1400, 400) == 933
    assert threshold_for_level(1400, 500) == 1166


@given(st.integers(0, 5000), st.sampled_from(FREQS), st.sampled_from(FREQS))
def test_threshold_monotone(top, f1, f2):
    assert threshold_for_level(top, 600) == top
    lo, hi = sorted((f1, f2))
    assert threshold_for_level(top, lo) <= threshold_for_level(top, hi)
    assert threshold_for_level(top, f1) <= threshold_for_level(top + 1, f1)


def test_tdvs_examples():
    p = TdvsPolicy(1000)
    d = tdvs_decide(p, 900, 0)
    assert (d.direction, d.level) == (DOWN, 1)
    assert DEFAULT_VF_TABLE[d.level].voltage == 1.25
    assert tdvs_decide(p, 1100, 0).level == 0
    assert tdvs_decide(p, 1100, 0).direction == HOLD
    assert tdvs_decide(p, 1000, 0).direction == HOLD
    d = tdvs_decide(TdvsPolicy(1400), 1200, 2)
    assert (d.direction, d.level) == (UP, 1)
    assert tdvs_decide(p, 0, 4).level == 4
    with pytest.raises(ValueError):
        tdvs_decide(p, -1, 0)


def test_edvs_examples():
    p = EdvsPolicy()
    assert edvs_decide(p, 0.35, 0).level == 1
    assert edvs_decide(p, 0.04, 0).level == 0
    assert edvs_decide(p, 0.10, 2).direction == HOLD
    assert edvs_decide(p, 0.04, 3).level == 2
    with pytest.raises(ValueError):
        edvs_decide(p, 1.5, 0)


@given(st.floats(0, 1), st.integers(0, 4), st.floats(0, 3000), st.sampled_from([800, 1000, 1200, 1400]))
def test_one_step_clamped(idle, level, rate, top):
    for d in (edvs_decide(EdvsPolicy(), idle, level), tdvs_decide(TdvsPolicy(top), rate, level)):
        assert 0 <= d.level <= 4
        assert abs(d.level - level) <= 1
        assert (d.direction == HOLD) == (d.level == level)


@given(st.lists(st.floats(0, 1), min_size=6, max_size=6), st.integers(0, 5), st.floats(0, 1))
def test_edvs_per_me_independence(idles, k, other):
    p = EdvsPolicy()
    before = edvs_decide(p, idles[k], 2)
    perturbed = list(idles)
    for j in range(6):
        if j != k:
            perturbed[j] = other
    assert edvs_decide(p, perturbed[k], 2) == before


def test_policy_validation():
    with pytest.raises(ValueError):
        TdvsPolicy(1000, window=0)
    with pytest.raises(ValueError):
        EdvsPolicy(idle_threshold=1.0)
    with pytest.raises(ValueError):
        EdvsPolicy(window=-5)


def test_window_rate():
    assert window_rate(33_333_333, 33_333) == pytest.approx(1000, rel=1e-4)
    assert window_rate(0, 10) == 0
    assert window_rate(12_000, 20_000 / 600) == pytest.approx(360)
    w = MonitorWindow()
    w.add_packet(512)
    w.add_packet(512)
    assert window_rate(w, 1.024) == pytest.approx(1000)
    w.reset(5.0)
    assert (w.bits, w.packets, w.start_us) == (0, 0, 5.0)
    with pytest.raises(ValueError):
        window_rate(w, 0)


def test_overhead_energy():
    assert tdvs_overhead_energy(0, 0.0005) == 0
    assert tdvs_overhead_energy(100, 0.0005) == pytest.approx(0.05)

