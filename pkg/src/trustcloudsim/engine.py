"""Scenario construction, the two-phase run lifecycle, metrics, replication.

A run builds the network from a scenario config, executes the cooperative
training phase for every device, then steps the clustering protocol until the
round budget is spent or the network dies.  The metrics log carries enough
per-round detail to compute the five evaluation metrics and the CSV tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from random import Random
from typing import Optional

import numpy as np

from .cloud import DropSet
from .config import ScenarioConfig, with_overrides
from .errors import ConfigError, NoNeighborError, UndefinedMetricError
from .medium import monitor_energy
from .protocol import (
    ADVANCED,
    GENERIC,
    HONEST,
    SUPER,
    ClassifierOverride,
    DeviceState,
    NetworkState,
    run_round,
)
from .runtime import Classification, TrustStore, UpdateAccumulators
from .training import (
    StandardClouds,
    TrainingState,
    merge_recommendations,
    run_training_round,
    training_complete,
    training_step,
)

ATTACKER_ORDER = (GENERIC, ADVANCED, SUPER)


@dataclass
class RoundStats:
    """Aggregates of one protocol round."""

    round_index: int
    bad_prob: float
    alive: int
    honest_alive: int
    heads: int
    clusters_with_members: int
    malicious_clusters: int
    packets_sent: int
    packets_received: int
    timely: int
    delayed: int
    dropped: int
    attack_drops: int
    attack_delays: int
    direct_to_sink: int
    decisions: int
    correct_decisions: int
    # (observer, target, classified_malicious, target_is_malicious)
    decision_detail: list[tuple[int, int, bool, bool]] = field(default_factory=list)


@dataclass
class TrainingReport:
    device: int
    rounds_used: int
    boundary_ok: bool
    forced: bool
    clouds: Optional[StandardClouds]


@dataclass
class MetricsLog:
    """Everything recorded about one simulation run."""

    config: ScenarioConfig
    attacker_class: dict[int, str]
    training: list[TrainingReport]
    round_stats: list[RoundStats] = field(default_factory=list)
    death_round: dict[int, int] = field(default_factory=dict)

    @property
    def rounds_completed(self) -> int:
        return len(self.round_stats)


def _largest_remainder(total: int, shares: tuple[float, ...]) -> list[int]:
    quotas = [total * s for s in shares]
    counts = [int(math.floor(q)) for q in quotas]
    remainder = total - sum(counts)
    order = sorted(range(len(shares)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def build_scenario(cfg: ScenarioConfig, rng: Random) -> NetworkState:
    """Deploy devices uniformly at random and assign attacker classes."""
    cfg.validate()
    n = cfg.device_count
    devices = []
    for dev_id in range(n):
        x = rng.uniform(0.0, cfg.area_width)
        y = rng.uniform(0.0, cfg.area_height)
        devices.append(
            DeviceState(
                id=dev_id,
                x=x,
                y=y,
                energy=cfg.e0,
                store=TrustStore(cfg.thr_drp),
                accumulators=UpdateAccumulators(
                    malicious_pool=DropSet(cfg.max_drp),
                    normal_pool=DropSet(cfg.max_drp),
                ),
                training=TrainingState(
                    malicious_drops=DropSet(cfg.max_drp),
                    normal_drops=DropSet(cfg.max_drp),
                ),
            )
        )
    n_mal = int(round(cfg.malicious_fraction * n))
    if n_mal > n:
        raise ConfigError("malicious count exceeds device count")
    malicious_ids = sorted(rng.sample(range(n), n_mal)) if n_mal else []
    counts = _largest_remainder(
        n_mal, (cfg.generic_share, cfg.advanced_share, cfg.super_share)
    )
    cursor = 0
    for klass, count in zip(ATTACKER_ORDER, counts):
        for dev_id in malicious_ids[cursor : cursor + count]:
            devices[dev_id].attacker = klass
        cursor += count
    return NetworkState(cfg, devices)


def run_training_phase(net: NetworkState, rng: Random) -> list[TrainingReport]:
    """Train every device's standard clouds, then merge neighborhood averages.

    Attackers behave honestly here: the deployment window is assumed clean.
    A device with too few neighbors to stage a route stops immediately and
    relies on received recommendations, if any.
    """
    cfg = net.cfg
    phase = net.phase_for(0)
    reports = []
    for dev in net.devices:
        state = dev.training
        while dev.alive and not training_complete(state, max_tr=cfg.max_tr):
            neighborhood = [net.devices[nid] for nid, _ in net.neighbors[dev.id]]
            try:
                malicious, normal = run_training_round(
                    dev,
                    neighborhood,
                    phase,
                    rng,
                    n_f=cfg.n_f,
                    p_dp=cfg.p_dp,
                    p_dy=cfg.p_dy,
                    max_dur=cfg.max_dur,
                    bits=cfg.training_bits,
                    energy=net.energy,
                )
            except NoNeighborError:
                break
            training_step(state, malicious, normal, max_tr=cfg.max_tr)
            dev.spend(monitor_energy(cfg.monitor_seconds, net.energy))
        boundary_ok = (
            state.initial_built
            and state.stc_m is not None
            and state.stc_m.ex < state.stc_n.ex
        )
        reports.append(
            TrainingReport(
                device=dev.id,
                rounds_used=state.rounds_done,
                boundary_ok=boundary_ok,
                forced=not boundary_ok,
                clouds=state.standard_clouds(),
            )
        )
        dev.forced_terminated = not boundary_ok

    # Every trained device recommends its clouds to neighbors; each device
    # averages its own with everything received.
    published = {dev.id: dev.training.standard_clouds() for dev in net.devices}
    for dev in net.devices:
        received = [
            published[nid]
            for nid, _ in net.neighbors[dev.id]
            if published[nid] is not None
        ]
        own = published[dev.id]
        if own is not None:
            dev.stds = merge_recommendations(own, received)
        elif received:
            dev.stds = merge_recommendations(received[0], received[1:])
        else:
            dev.stds = None
    net.mark_deaths(0)
    return reports


def run_simulation(
    cfg: ScenarioConfig,
    *,
    classifier_override: Optional[ClassifierOverride] = None,
) -> MetricsLog:
    """Execute one full run: training, then rounds until budget or death."""
    cfg.validate()
    rng = Random(cfg.seed)
    np_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    net = build_scenario(cfg, rng)
    training = run_training_phase(net, rng)
    log = MetricsLog(
        config=cfg,
        attacker_class={d.id: d.attacker for d in net.devices},
        training=training,
    )
    for r in range(cfg.max_rounds):
        if net.alive_count() == 0:
            break
        outcome = run_round(
            net, r, rng, np_rng, classifier_override=classifier_override
        )
        phase = net.phase_for(r)
        timely = delayed = received = 0
        for t in outcome.transfers:
            received += t.received
            if t.outcome == "timely":
                timely += 1
            elif t.outcome == "delayed":
                delayed += 1
        with_members = [
            h for h, members in outcome.clusters.items() if members
        ]
        malicious_clusters = sum(
            1 for h in with_members if net.devices[h].is_malicious
        )
        correct = sum(
            1
            for d in outcome.decisions
            if (d.verdict is Classification.MALICIOUS) == d.target_malicious
        )
        log.round_stats.append(
            RoundStats(
                round_index=r,
                bad_prob=phase.bad_prob,
                alive=net.alive_count(),
                honest_alive=sum(
                    1 for d in net.devices if d.alive and not d.is_malicious
                ),
                heads=len(outcome.clusters),
                clusters_with_members=len(with_members),
                malicious_clusters=malicious_clusters,
                packets_sent=len(outcome.transfers),
                packets_received=received,
                timely=timely,
                delayed=delayed,
                dropped=len(outcome.transfers) - timely - delayed,
                attack_drops=outcome.attack_drops,
                attack_delays=outcome.attack_delays,
                direct_to_sink=len(outcome.direct_to_sink),
                decisions=len(outcome.decisions),
                correct_decisions=correct,
                decision_detail=[
                    (
                        d.observer,
                        d.target,
                        d.verdict is Classification.MALICIOUS,
                        d.target_malicious,
                    )
                    for d in outcome.decisions
                ],
            )
        )
    log.death_round = {
        d.id: d.death_round for d in net.devices if d.death_round is not None
    }
    return log


# --- metrics ---------------------------------------------------------------


def metric_network_lifetime(log: MetricsLog) -> tuple[int, bool]:
    """Round of the first honest device death, or (max rounds, censored)."""
    honest_deaths = [
        r
        for dev, r in log.death_round.items()
        if log.attacker_class[dev] == HONEST
    ]
    if honest_deaths:
        return min(honest_deaths), False
    return log.config.max_rounds, True


def metric_timely_rate(log: MetricsLog) -> float:
    """Immediately forwarded packets over packets a head accepted to forward."""
    needing = sum(s.packets_received for s in log.round_stats)
    if needing == 0:
        raise UndefinedMetricError("no packets required forwarding")
    timely = sum(s.timely for s in log.round_stats)
    return timely / needing


def metric_decision_accuracy(log: MetricsLog) -> float:
    total = sum(s.decisions for s in log.round_stats)
    if total == 0:
        raise UndefinedMetricError("no classification decisions were emitted")
    correct = sum(s.correct_decisions for s in log.round_stats)
    return correct / total


def metric_total_attacks(log: MetricsLog) -> int:
    return sum(s.attack_drops + s.attack_delays for s in log.round_stats)


def metric_malicious_clusters(log: MetricsLog) -> list[float]:
    """Per-cycle mean count of clusters whose head is malicious."""
    cycle = log.config.rounds_per_cycle
    out = []
    for start in range(0, len(log.round_stats), cycle):
        chunk = log.round_stats[start : start + cycle]
        out.append(sum(s.malicious_clusters for s in chunk) / len(chunk))
    return out


def cycle_table(log: MetricsLog) -> list[dict]:
    """Per-cycle aggregate rows for reporting."""
    cycle = log.config.rounds_per_cycle
    rows = []
    for i, start in enumerate(range(0, len(log.round_stats), cycle)):
        chunk = log.round_stats[start : start + cycle]
        decisions = sum(s.decisions for s in chunk)
        received = sum(s.packets_received for s in chunk)
        rows.append(
            {
                "cycle": i + 1,
                "rounds": len(chunk),
                "malicious_clusters": sum(s.malicious_clusters for s in chunk)
                / len(chunk),
                "accuracy": (
                    sum(s.correct_decisions for s in chunk) / decisions
                    if decisions
                    else float("nan")
                ),
                "timely_rate": (
                    sum(s.timely for s in chunk) / received if received else float("nan")
                ),
                "attacks": sum(s.attack_drops + s.attack_delays for s in chunk),
                "alive": chunk[-1].alive,
            }
        )
    return rows


# --- replication -----------------------------------------------------------

SCALAR_METRICS = ("network_lifetime", "timely_rate", "decision_accuracy",
                  "total_attacks")


@dataclass
class MetricSummary:
    mean: float
    ci_low: float
    ci_high: float
    values: list[float]


@dataclass
class ReplicationSummary:
    scalars: dict[str, MetricSummary]
    malicious_clusters_series: list[float]
    censored_lifetimes: int
    n_runs: int


def derive_seed(master_seed: int, index: int) -> int:
    """Counter-based split of the master seed into per-run seeds."""
    return master_seed * 1_000_003 + index


def _confidence(values: list[float]) -> MetricSummary:
    n = len(values)
    mean = sum(values) / n
    if n > 1:
        var = sum((v - mean) ** 2 for v in values) / (n - 1)
        half = 1.96 * math.sqrt(var / n)
    else:
        half = 0.0
    return MetricSummary(mean, mean - half, mean + half, list(values))


def run_metrics(log: MetricsLog) -> dict[str, float]:
    """All scalar metrics of one run; undefined ones surface as NaN."""
    lifetime, censored = metric_network_lifetime(log)
    out = {
        "network_lifetime": float(lifetime),
        "lifetime_censored": float(censored),
        "total_attacks": float(metric_total_attacks(log)),
    }
    for name, fn in (
        ("timely_rate", metric_timely_rate),
        ("decision_accuracy", metric_decision_accuracy),
    ):
        try:
            out[name] = fn(log)
        except UndefinedMetricError:
            out[name] = float("nan")
    return out


def _replica_metrics(args: tuple[ScenarioConfig, int]) -> tuple[dict, list[float]]:
    cfg, index = args
    run_cfg = with_overrides(cfg, seed=derive_seed(cfg.seed, index))
    log = run_simulation(run_cfg)
    return run_metrics(log), metric_malicious_clusters(log)


def replicate(
    cfg: ScenarioConfig,
    n_runs: int,
    *,
    classifier_override: Optional[ClassifierOverride] = None,
    workers: int = 1,
) -> ReplicationSummary:
    """Independent seeded runs with normal-approximation 95% intervals.

    Replications share no state, so they may fan out over worker processes;
    aggregation is ordered by run index either way.  A classifier override
    forces the serial path (it may not be picklable).
    """
    if n_runs < 2:
        raise ConfigError("replication needs at least 2 runs")
    jobs = [(cfg, i) for i in range(n_runs)]
    if workers > 1 and classifier_override is None:
        import multiprocessing

        with multiprocessing.Pool(min(workers, n_runs)) as pool:
            results = pool.map(_replica_metrics, jobs)
    else:
        results = []
        for job in jobs:
            if classifier_override is None:
                results.append(_replica_metrics(job))
            else:
                run_cfg = with_overrides(cfg, seed=derive_seed(cfg.seed, job[1]))
                log = run_simulation(
                    run_cfg, classifier_override=classifier_override
                )
                results.append((run_metrics(log), metric_malicious_clusters(log)))

    per_metric: dict[str, list[float]] = {m: [] for m in SCALAR_METRICS}
    censored = 0
    series_sums: list[float] = []
    series_counts: list[int] = []
    for metrics, series in results:
        censored += int(metrics["lifetime_censored"])
        for name in SCALAR_METRICS:
            per_metric[name].append(metrics[name])
        for j, v in enumerate(series):
            if j >= len(series_sums):
                series_sums.append(0.0)
                series_counts.append(0)
            series_sums[j] += v
            series_counts[j] += 1
    return ReplicationSummary(
        scalars={m: _confidence(vs) for m, vs in per_metric.items()},
        malicious_clusters_series=[
            s / c for s, c in zip(series_sums, series_counts)
        ],
        censored_lifetimes=censored,
        n_runs=n_runs,
    )
