import math
from random import Random

import pytest

from trustcloudsim.config import ScenarioConfig
from trustcloudsim.engine import (
    _confidence,
    build_scenario,
    cycle_table,
    derive_seed,
    metric_decision_accuracy,
    metric_malicious_clusters,
    metric_network_lifetime,
    metric_timely_rate,
    metric_total_attacks,
    replicate,
    run_metrics,
    run_simulation,
)
from trustcloudsim.errors import ConfigError, UndefinedMetricError
from trustcloudsim.medium import ChannelPhase
from trustcloudsim.protocol import ADVANCED, GENERIC, HONEST, SUPER
from trustcloudsim.runtime import Classification


def test_build_scenario_attacker_split():
    cfg = ScenarioConfig(device_count=100, malicious_fraction=0.2, seed=1)
    net = build_scenario(cfg, Random(1))
    by_class = {}
    for dev in net.devices:
        by_class[dev.attacker] = by_class.get(dev.attacker, 0) + 1
    assert by_class[HONEST] == 80
    assert by_class[GENERIC] == 6
    assert by_class[ADVANCED] == 8
    assert by_class[SUPER] == 6


def test_build_scenario_all_honest_and_bounds():
    cfg = ScenarioConfig(device_count=50, malicious_fraction=0.0, seed=2)
    net = build_scenario(cfg, Random(2))
    assert all(d.attacker == HONEST for d in net.devices)
    assert all(0 <= d.x <= 100 and 0 <= d.y <= 100 for d in net.devices)


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        ScenarioConfig(device_count=0).validate()
    with pytest.raises(ConfigError):
        ScenarioConfig(generic_share=0.5, advanced_share=0.5, super_share=0.5).validate()
    with pytest.raises(ConfigError):
        ScenarioConfig(alpha=0.9, beta=0.2).validate()


def small_cfg(**overrides):
    params = dict(device_count=40, area_width=80.0, area_height=80.0,
                  malicious_fraction=0.2, max_rounds=120, seed=9)
    params.update(overrides)
    return ScenarioConfig(**params)


def test_run_simulation_deterministic():
    cfg = small_cfg()
    a = run_simulation(cfg)
    b = run_simulation(cfg)
    assert len(a.round_stats) == len(b.round_stats)
    for sa, sb in zip(a.round_stats, b.round_stats):
        assert sa == sb
    assert run_metrics(a) == run_metrics(b)


def test_metric_lifetime_censoring():
    log = run_simulation(small_cfg(max_rounds=40))
    lifetime, censored = metric_network_lifetime(log)
    assert censored and lifetime == 40

    lean = small_cfg(max_rounds=200, e0=0.05)
    lifetime2, censored2 = metric_network_lifetime(run_simulation(lean))
    assert not censored2
    assert 0 <= lifetime2 < 200


def test_metric_series_and_units():
    log = run_simulation(small_cfg(max_rounds=120))
    series = metric_malicious_clusters(log)
    assert len(series) == math.ceil(120 / log.config.rounds_per_cycle)
    assert 0.0 <= metric_timely_rate(log) <= 1.0
    assert 0.0 <= metric_decision_accuracy(log) <= 1.0
    assert metric_total_attacks(log) >= 0
    rows = cycle_table(log)
    assert [r["cycle"] for r in rows] == list(range(1, len(series) + 1))


def test_zero_malicious_run_has_no_attacks():
    log = run_simulation(small_cfg(malicious_fraction=0.0))
    assert metric_total_attacks(log) == 0


def test_undefined_metrics():
    cfg = small_cfg(max_rounds=1, phases=(ChannelPhase(1.0, 0.0, 0),))
    log = run_simulation(cfg)
    with pytest.raises(UndefinedMetricError):
        metric_timely_rate(log)
    with pytest.raises(UndefinedMetricError):
        metric_decision_accuracy(log)


def test_oracle_classifier_accuracy_is_one():
    def oracle(observer, target):
        return (
            Classification.MALICIOUS if target.is_malicious else Classification.NORMAL
        )

    log = run_simulation(small_cfg(), classifier_override=oracle)
    assert metric_decision_accuracy(log) == 1.0


def test_replicate_deterministic_metric_has_zero_width():
    cfg = small_cfg(malicious_fraction=0.0, max_rounds=60)
    summary = replicate(cfg, 3)
    attacks = summary.scalars["total_attacks"]
    assert attacks.mean == 0.0
    assert attacks.ci_low == attacks.ci_high == 0.0


def test_replicate_requires_two_runs():
    with pytest.raises(ConfigError):
        replicate(small_cfg(), 1)


def test_replicate_parallel_matches_serial():
    cfg = small_cfg(max_rounds=60)
    serial = replicate(cfg, 2, workers=1)
    parallel = replicate(cfg, 2, workers=2)
    for name in serial.scalars:
        assert serial.scalars[name].values == parallel.scalars[name].values


def test_confidence_interval_scaling():
    rng = Random(13)
    values = [rng.gauss(5.0, 1.0) for _ in range(400)]
    half = _confidence(values[:200])
    full = _confidence(values)
    width_half = half.ci_high - half.ci_low
    width_full = full.ci_high - full.ci_low
    assert 0.55 < width_full / width_half < 0.9  # about 1/sqrt(2)


def test_derive_seed_distinct():
    seeds = {derive_seed(1, i) for i in range(100)}
    seeds |= {derive_seed(2, i) for i in range(100)}
    assert len(seeds) == 200
