import math

import pytest

import nocperf


def test_moment_relations():
    assert nocperf.scv_from_burst(0.2, 0.5) == pytest.approx(2 / 0.5 - 0.2 - 1)
    scv = nocperf.scv_from_burst(0.3, 0.4)
    assert nocperf.burst_from_scv(0.3, scv) == pytest.approx(0.4, abs=1e-12)
    with pytest.raises(nocperf.DomainError):
        nocperf.burst_from_scv(0.3, 0.5)


def test_bernoulli_d1_has_no_wait():
    assert nocperf.single_queue_wait(0.5, 0.0) == 0.0
    assert nocperf.single_queue_wait(0.3, 0.4) > 0.0


def test_basic_priority_high_class_waits_less():
    high, low = nocperf.basic_priority([(0.2, 0.4), (0.2, 0.4)])
    assert 0 < high < low


def test_sampler_rate():
    gaps = nocperf.sample_interarrivals(0.3, 0.3, 7, 200000)
    assert len(gaps) == 200000
    assert 1 / (sum(gaps) / len(gaps)) == pytest.approx(0.3, rel=0.02)


def test_analyze_ring():
    cfg = {"topology": {"kind": "ring", "nodes": 6}, "traffic": {"rate": 0.1, "burst_prob": 0.2}}
    rep = nocperf.analyze(cfg)
    base = nocperf.analyze(cfg, baseline=True)
    assert len(rep["flows"]) == 30
    assert base["mean_latency"] < rep["mean_latency"]
    for f in rep["flows"]:
        assert f["latency"] >= 2 * len(f["hop_wait"]) - 1e-12


def test_unstable_config_raises():
    with pytest.raises(nocperf.InstabilityError):
        nocperf.analyze({"topology": {"kind": "mesh"}, "traffic": {"rate": 0.9}})


def test_bad_config_raises():
    with pytest.raises(nocperf.ConfigError):
        nocperf.analyze({"topology": {"kind": "torus"}})


def test_simulate_small():
    cfg = {
        "topology": {"kind": "ring", "nodes": 4},
        "traffic": {"rate": 0.2, "burst_prob": 0.2},
        "simulation": {"warmup": 2000, "measure": 20000, "seed": 3},
    }
    a = nocperf.simulate(cfg)
    b = nocperf.simulate(cfg)
    assert a == b
    assert not a["saturated"]
    assert math.isfinite(a["mean_latency"])


def test_estimate_burstiness_roundtrip():
    gaps = nocperf.sample_interarrivals(0.2, 0.4, 11, 60000)
    t, events = 0, []
    for g in gaps:
        t += g
        if t >= 200000:
            break
        events.append((t, 0, 1))
    est = nocperf.estimate_burstiness(events)
    assert est[0]["flag"] == "ok"
    assert est[0]["burst_prob"] == pytest.approx(0.4, abs=0.05)
