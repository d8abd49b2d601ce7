"""Round-based secure clustering: election, joining, data transfer, trust.

Each round runs a fixed schedule over devices ordered by id: heads self-elect
against the rotating threshold, members join the nearest trusted head (or
fall back to self-election / direct sink transmission), members transmit one
data packet each while overhearing the head's relays of the whole cluster,
per-round evidence turns into trust values and recommendations, individual
clouds are rebuilt, targets are classified, and the classified values feed
the standard-cloud update pools.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from random import Random
from typing import Callable, NamedTuple, Optional

from .cloud import TrustCloud
from .config import ScenarioConfig
from .fuzzy import EvidenceWindow, compute_attributes, infer_trust
from .medium import (
    ChannelPhase,
    EnergyParams,
    aggregate_energy,
    monitor_energy,
    overhear_energy,
    rx_energy,
    tx_energy,
)
from .runtime import (
    Classification,
    TrustStore,
    UpdateAccumulators,
    accumulate_and_maybe_update,
    classify,
    classify_batch,
    record_trust,
    recommend_trust,
)
from .training import StandardClouds, TrainingState

HONEST = "honest"
GENERIC = "generic"
ADVANCED = "advanced"
SUPER = "super"

#: Drop/delay probability multipliers by attacker class.
ATTACK_MULTIPLIER = {HONEST: 0.0, GENERIC: 2.0, ADVANCED: 4.0, SUPER: 6.0}


@dataclass(slots=True)
class DeviceState:
    """One device: identity, radio position, energy, role, and trust state."""

    id: int
    x: float
    y: float
    energy: float
    attacker: str = HONEST
    alive: bool = True
    last_head_round: Optional[int] = None
    store: TrustStore = field(default_factory=TrustStore)
    stds: Optional[StandardClouds] = None
    accumulators: UpdateAccumulators = field(default_factory=UpdateAccumulators)
    training: TrainingState = field(default_factory=TrainingState)
    forced_terminated: bool = False
    death_round: Optional[int] = None

    @property
    def is_malicious(self) -> bool:
        return self.attacker != HONEST

    def spend(self, cost: float) -> bool:
        """Charge an action; a device that cannot pay dies and the action fails.

        A device that spends its final joule completes the action and is then
        marked dead.
        """
        if not self.alive:
            return False
        if self.energy >= cost:
            self.energy -= cost
            if self.energy <= 0.0:
                self.energy = 0.0
                self.alive = False
            return True
        self.energy = 0.0
        self.alive = False
        return False


class ClusterChoice(NamedTuple):
    kind: str  # "join" | "become_head" | "sink"
    head: Optional[int]


@dataclass(slots=True)
class TransferRecord:
    """Ground truth for one member packet handed to a head."""

    member: int
    head: int
    received: bool
    outcome: str  # timely | delayed | dropped
    attack_drop: bool = False
    attack_delay: bool = False


@dataclass(slots=True)
class DecisionRecord:
    observer: int
    target: int
    verdict: Classification
    target_malicious: bool


@dataclass
class ClusterRoundOutcome:
    """Everything observable about one protocol round."""

    round_index: int
    clusters: dict[int, list[int]] = field(default_factory=dict)
    rule_c_heads: list[int] = field(default_factory=list)
    direct_to_sink: list[int] = field(default_factory=list)
    transfers: list[TransferRecord] = field(default_factory=list)
    attack_drops: int = 0
    attack_delays: int = 0
    decisions: list[DecisionRecord] = field(default_factory=list)


class NetworkState:
    """Devices plus the static topology and scenario parameters."""

    def __init__(self, cfg: ScenarioConfig, devices: list[DeviceState]):
        self.cfg = cfg
        self.energy: EnergyParams = cfg.energy_params()
        self.devices = devices
        self.sink = cfg.sink()
        self.phases = cfg.channel_schedule()
        self.epoch = math.ceil(1.0 / cfg.p_ch)
        self.sink_dist = [
            math.hypot(d.x - self.sink[0], d.y - self.sink[1]) for d in devices
        ]
        radius = cfg.neighbor_radius
        self.neighbors: list[list[tuple[int, float]]] = []
        self.neighbor_sets: list[frozenset[int]] = []
        for d in devices:
            near = []
            for other in devices:
                if other.id == d.id:
                    continue
                dist = math.hypot(d.x - other.x, d.y - other.y)
                if dist <= radius:
                    near.append((other.id, dist))
            near.sort()
            self.neighbors.append(near)
            self.neighbor_sets.append(frozenset(n for n, _ in near))

    def phase_for(self, r: int) -> ChannelPhase:
        current = self.phases[0]
        for phase in self.phases:
            if phase.start_round <= r:
                current = phase
            else:
                break
        return current

    def alive_devices(self) -> list[DeviceState]:
        return [d for d in self.devices if d.alive]

    def alive_count(self) -> int:
        return sum(1 for d in self.devices if d.alive)

    def mark_deaths(self, r: int) -> None:
        for d in self.devices:
            if not d.alive and d.death_round is None:
                d.death_round = r


#: Optional stand-in for the trust classifier, e.g. a ground-truth oracle in
#: harness self-tests.  Called as (observer, target) -> Classification.
ClassifierOverride = Callable[[DeviceState, DeviceState], Classification]


def election_threshold(r: int, p_ch: float) -> float:
    """Rotating self-election threshold, capped at 1."""
    denom = 1.0 - p_ch * math.fmod(r, 1.0 / p_ch)
    if denom <= 0.0:
        return 1.0
    return min(p_ch / denom, 1.0)


def is_eligible(device: DeviceState, r: int, epoch: int) -> bool:
    return device.last_head_round is None or r - device.last_head_round >= epoch


def decide_head(
    device: DeviceState, r: int, rng: Random, *, p_ch: float, epoch: int
) -> bool:
    """Self-decide headship; a winning device books the round immediately."""
    if not device.alive or not is_eligible(device, r, epoch):
        return False
    if rng.random() < election_threshold(r, p_ch):
        device.last_head_round = r
        return True
    return False


def choose_cluster(
    member: DeviceState,
    candidates: list[tuple[DeviceState, float]],
    rng: Random,
    *,
    r: int,
    epoch: int,
    kappa: float,
    n_drp: int,
    decision_of: Optional[Callable[[DeviceState], Optional[Classification]]] = None,
) -> ClusterChoice:
    """Pick a head among broadcast candidates, else self-elect or go direct.

    Candidates with individual clouds are classified and the nearest normal
    one wins (ties to the lowest id).  With no clouds anywhere, the nearest
    never-interacted candidate is preferred, then the highest trust estimate.
    When nothing survives, an eligible member becomes a head itself.
    """

    def default_decision(head: DeviceState) -> Optional[Classification]:
        itc = member.store.cloud(head.id)
        if itc is None or member.stds is None:
            return None
        return classify(itc, member.stds, rng, kappa=kappa, n_drp=n_drp)

    decide = decision_of if decision_of is not None else default_decision

    decisions = [(head, dist, decide(head)) for head, dist in candidates]
    normal = [(d, h.id) for h, d, v in decisions if v is Classification.NORMAL]
    if normal:
        normal.sort()
        return ClusterChoice("join", normal[0][1])
    # Candidates classified malicious are discarded; the unclassifiable rest
    # (no individual cloud yet) fall back to first-hand heuristics.
    survivors = [(h, d) for h, d, v in decisions if v is None]
    if survivors:
        fresh = [
            (dist, head.id)
            for head, dist in survivors
            if member.store.get(head.id) is None
            or not member.store.get(head.id).interacted
        ]
        if fresh:
            fresh.sort()
            return ClusterChoice("join", fresh[0][1])
        ranked = [
            (-member.store.mean_trust(head.id), head.id) for head, _ in survivors
        ]
        ranked.sort()
        return ClusterChoice("join", ranked[0][1])
    if is_eligible(member, r, epoch):
        return ClusterChoice("become_head", None)
    return ClusterChoice("sink", None)


def run_data_phase(
    net: NetworkState,
    clusters: dict[int, list[int]],
    phase: ChannelPhase,
    rng: Random,
    outcome: ClusterRoundOutcome,
) -> dict[tuple[int, int], EvidenceWindow]:
    """Slotted data transfer with cluster-wide overhearing.

    Every member sends one data packet to its head; the head relays each
    received packet toward the sink in a single attempt while malicious heads
    drop or delay with their class probabilities.  Members overhear both the uplinks and the relays through
    independent channel draws, producing one evidence window per (observer,
    head) pair for this round.
    """
    cfg = net.cfg
    energy = net.energy
    bits = cfg.data_bits
    p0 = phase.bad_prob
    draw = rng.random
    overhear_cost = overhear_energy(bits, energy)
    rx_cost = rx_energy(bits, energy)
    aggregate_cost = aggregate_energy(bits, 1, energy)
    # (observer, head) -> [sent, forwarded, timely]; folded into
    # EvidenceWindow objects once the phase completes.
    counters: dict[tuple[int, int], list[int]] = {}

    for head_id in sorted(clusters):
        head = net.devices[head_id]
        member_ids = sorted(clusters[head_id])
        members = [net.devices[m] for m in member_ids]
        mult = ATTACK_MULTIPLIER[head.attacker]
        sink_d = net.sink_dist[head_id]

        for member in members:
            if not member.alive:
                continue
            dist = math.hypot(member.x - head.x, member.y - head.y)
            if not member.spend(tx_energy(bits, dist, energy)):
                continue
            received = (
                head.alive
                and (p0 == 0.0 or draw() >= p0)
                and head.spend(rx_cost)
            )
            record = TransferRecord(member.id, head.id, received, "dropped")
            outcome.transfers.append(record)

            # Uplink overhearing: cluster mates that catch the transmission
            # know this packet awaits forwarding.
            watchers = [member]
            for o in members:
                if (
                    o.id != member.id
                    and o.alive
                    and (p0 == 0.0 or draw() >= p0)
                    and o.spend(overhear_cost)
                ):
                    watchers.append(o)

            if not received or (mult and draw() < mult * cfg.p_dp):
                if received:
                    record.attack_drop = True
                    outcome.attack_drops += 1
                for o in watchers:
                    cnt = counters.get((o.id, head_id))
                    if cnt is None:
                        counters[(o.id, head_id)] = [1, 0, 0]
                    else:
                        cnt[0] += 1
                continue

            attack_delayed = bool(mult) and draw() < mult * cfg.p_dy
            if attack_delayed:
                rng.uniform(0.0, cfg.max_dur)  # delay duration within the slot
                record.attack_delay = True
                outcome.attack_delays += 1

            # The head relays once; lost relays surface as drops, so a
            # delaying event can only come from an actual delaying attack.
            head.spend(aggregate_cost)
            attempted = head.spend(tx_energy(bits, sink_d, energy))
            delivered = attempted and (p0 == 0.0 or draw() >= p0)

            if not attempted or not delivered:
                record.outcome = "dropped"
            elif attack_delayed:
                record.outcome = "delayed"
            else:
                record.outcome = "timely"

            for o in watchers:
                saw = (
                    attempted
                    and (p0 == 0.0 or draw() >= p0)
                    and o.spend(overhear_cost)
                )
                cnt = counters.get((o.id, head_id))
                if cnt is None:
                    cnt = [0, 0, 0]
                    counters[(o.id, head_id)] = cnt
                cnt[0] += 1
                if saw:
                    cnt[1] += 1
                    if not attack_delayed:
                        cnt[2] += 1

        # The head reports its own readings alongside the aggregate.
        if head.alive:
            head.spend(tx_energy(bits, sink_d, energy))

    return {
        key: EvidenceWindow(sent, forwarded, timely)
        for key, (sent, forwarded, timely) in counters.items()
    }


def run_round(
    net: NetworkState,
    r: int,
    rng: Random,
    np_rng,
    *,
    classifier_override: Optional[ClassifierOverride] = None,
) -> ClusterRoundOutcome:
    """Execute one full protocol round and return its outcome."""
    cfg = net.cfg
    energy = net.energy
    phase = net.phase_for(r)
    outcome = ClusterRoundOutcome(round_index=r)
    alive = net.alive_devices()
    if not alive:
        return outcome

    # --- election ---------------------------------------------------------
    heads: list[int] = []
    for dev in alive:
        if decide_head(dev, r, rng, p_ch=cfg.p_ch, epoch=net.epoch):
            heads.append(dev.id)
            dev.spend(tx_energy(cfg.control_bits, cfg.neighbor_radius, energy))
    head_set = set(heads)

    # Broadcast reception: election announcements are control-plane messages
    # heard across the deployment area, but a member only learns of heads
    # whose announcement its own channel actually delivered.
    candidates: dict[int, list[tuple[DeviceState, float]]] = {}
    p0 = phase.bad_prob
    control_rx = rx_energy(cfg.control_bits, energy)
    for dev in alive:
        if dev.id in head_set or not dev.alive:
            continue
        seen: list[tuple[DeviceState, float]] = []
        for head_id in heads:
            head = net.devices[head_id]
            if not head.alive:
                continue
            if (p0 == 0.0 or rng.random() >= p0) and dev.spend(control_rx):
                dist = math.hypot(dev.x - head.x, dev.y - head.y)
                seen.append((head, dist))
        candidates[dev.id] = seen

    # --- cluster joining --------------------------------------------------
    emitted: set[tuple[int, int]] = set()

    def emit(observer: DeviceState, target: DeviceState, verdict: Classification):
        key = (observer.id, target.id)
        if key in emitted:
            return
        emitted.add(key)
        outcome.decisions.append(
            DecisionRecord(observer.id, target.id, verdict, target.is_malicious)
        )

    join_requests: list[tuple[int, int]] = []
    join_itcs: list[TrustCloud] = []
    join_stds: list[StandardClouds] = []
    for dev_id in sorted(candidates):
        member = net.devices[dev_id]
        for head, _dist in candidates[dev_id]:
            itc = member.store.cloud(head.id)
            if itc is not None and member.stds is not None:
                join_requests.append((dev_id, head.id))
                join_itcs.append(itc)
                join_stds.append(member.stds)
    if classifier_override is None:
        verdicts = classify_batch(
            join_itcs, join_stds, np_rng, kappa=cfg.kappa, n_drp=cfg.n_drp
        )
    else:
        verdicts = [
            classifier_override(net.devices[m], net.devices[h])
            for m, h in join_requests
        ]
    join_decisions = {pair: v for pair, v in zip(join_requests, verdicts)}
    for (m, h), verdict in zip(join_requests, verdicts):
        emit(net.devices[m], net.devices[h], verdict)

    clusters: dict[int, list[int]] = {h: [] for h in heads}
    for dev_id in sorted(candidates):
        member = net.devices[dev_id]
        if not member.alive:
            continue
        choice = choose_cluster(
            member,
            candidates[dev_id],
            rng,
            r=r,
            epoch=net.epoch,
            kappa=cfg.kappa,
            n_drp=cfg.n_drp,
            decision_of=lambda head: join_decisions.get((member.id, head.id)),
        )
        if choice.kind == "join":
            clusters[choice.head].append(dev_id)
        elif choice.kind == "become_head":
            member.last_head_round = r
            member.spend(tx_energy(cfg.control_bits, cfg.neighbor_radius, energy))
            outcome.rule_c_heads.append(dev_id)
            clusters[dev_id] = []
        else:
            outcome.direct_to_sink.append(dev_id)
            member.spend(tx_energy(cfg.data_bits, net.sink_dist[dev_id], energy))

    outcome.clusters = clusters

    # --- data transfer and overhearing -------------------------------------
    windows = run_data_phase(net, clusters, phase, rng, outcome)

    # Per-round monitoring duty for every device still alive.
    for dev in net.devices:
        if dev.alive:
            dev.spend(monitor_energy(cfg.monitor_seconds, energy))

    # --- trust inference on own head ---------------------------------------
    # updated maps (observer, target) to the trust value computed this round;
    # those values are both the new window drops and the std-update pool feed.
    updated: dict[tuple[int, int], float] = {}
    for head_id in sorted(clusters):
        for member_id in sorted(clusters[head_id]):
            member = net.devices[member_id]
            if not member.alive:
                continue
            window = windows.get((member_id, head_id))
            if window is None or window.sent == 0:
                continue
            value = infer_trust(compute_attributes(window))
            record_trust(member.store, head_id, value, direct=True)
            updated[(member_id, head_id)] = value

    # --- recommendations from the chosen head ------------------------------
    # A member asks its trusted head about the devices it must judge soon
    # (the round's candidate heads) and about pairs it has no individual
    # cloud for yet.  The head only relays trust it formed by its own
    # overhearing, so recommendation chains cannot drift away from observed
    # behavior.
    for head_id in sorted(clusters):
        head = net.devices[head_id]
        for member_id in sorted(clusters[head_id]):
            member = net.devices[member_id]
            if not member.alive or not head.alive:
                continue
            t_ij = member.store.mean_trust(head_id)
            if t_ij <= 0.0:
                continue
            store = member.store
            target_ids = {h.id for h, _ in candidates.get(member_id, [])}
            target_ids.update(net.neighbor_sets[member_id] - store.known())
            target_ids.update(store.immature)
            target_ids.discard(head_id)
            target_ids.discard(member_id)
            offers = [
                (t, head.store.firsthand_trust(t)) for t in sorted(target_ids)
            ]
            offers = [(t, v) for t, v in offers if v is not None]
            if not offers:
                continue
            dist = math.hypot(member.x - head.x, member.y - head.y)
            member.spend(tx_energy(cfg.control_bits, dist, energy))
            if not (
                head.spend(rx_energy(cfg.control_bits, energy))
                and head.spend(tx_energy(cfg.control_bits, dist, energy))
                and member.spend(rx_energy(cfg.control_bits, energy))
            ):
                continue
            for target, t_jk in offers:
                value = recommend_trust(
                    member.store.mean_trust(target), t_jk, t_ij
                )
                record_trust(member.store, target, value)
                updated[(member_id, target)] = value

    # --- classification and standard-cloud updates -------------------------
    post_requests: list[tuple[int, int]] = []
    post_itcs: list[TrustCloud] = []
    post_stds: list[StandardClouds] = []
    for member_id, target in sorted(updated):
        member = net.devices[member_id]
        if member.stds is None:
            continue
        itc = member.store.cloud(target)
        if itc is None:
            continue
        post_requests.append((member_id, target))
        post_itcs.append(itc)
        post_stds.append(member.stds)
    if classifier_override is None:
        post_verdicts = classify_batch(
            post_itcs, post_stds, np_rng, kappa=cfg.kappa, n_drp=cfg.n_drp
        )
    else:
        post_verdicts = [
            classifier_override(net.devices[m], net.devices[t])
            for m, t in post_requests
        ]
    for (member_id, target), verdict in zip(post_requests, post_verdicts):
        member = net.devices[member_id]
        emit(member, net.devices[target], verdict)
        member.accumulators, member.stds = accumulate_and_maybe_update(
            member.accumulators,
            verdict,
            member.store.mean_trust(target),
            member.stds,
            alpha=cfg.alpha,
            beta=cfg.beta,
        )

    net.mark_deaths(r)
    return outcome
