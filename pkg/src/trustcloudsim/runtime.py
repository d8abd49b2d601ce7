"""Steady-state trust machinery.

Each device keeps, per target, a sliding window of trust values (inferred
directly or received as recommendations), the window mean as its current
trust estimate, and an individual trust cloud rebuilt from the window once it
is full.  Targets are classified against the device's standard clouds with an
expectation-margin rule backed by a drop-sampled similarity comparison, and
the classified trust values accumulate into pools that periodically refresh
the standard clouds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from random import Random
from typing import Optional

import numpy as np

from .cloud import (
    DEFAULT_SIMILARITY_DROPS,
    DropSet,
    TrustCloud,
    backward_cloud,
    generate_drop,
)
from .errors import ConfigError, DomainError, InsufficientEvidenceError, ZeroEntropyError
from .training import StandardClouds

THR_DRP = 20
MARGIN_KAPPA = 3.0
UPDATE_ALPHA = 0.8
UPDATE_BETA = 0.2
POOL_CAPACITY = 100


class Classification(enum.Enum):
    MALICIOUS = "malicious"
    NORMAL = "normal"


class TargetRecord:
    """One observer's view of one target device.

    The drop window mixes inferred and recommended values; the first-hand
    window keeps only directly inferred ones and is what the observer passes
    on when asked for a recommendation.  The individual cloud is rebuilt
    lazily: it always reflects the current window contents but is only
    materialized when read.
    """

    __slots__ = ("window", "firsthand", "mean", "interacted",
                 "firsthand_value", "_sum", "_fh_sum", "_cloud", "_stale")

    def __init__(self, window_size: int):
        self.window = DropSet(window_size)
        self.firsthand = DropSet(window_size)
        self.mean = 0.0
        self.interacted = False
        self.firsthand_value: Optional[float] = None
        self._sum = 0.0
        self._fh_sum = 0.0
        self._cloud: Optional[TrustCloud] = None
        self._stale = False

    def firsthand_mean(self) -> Optional[float]:
        return self.firsthand_value

    @property
    def cloud(self) -> Optional[TrustCloud]:
        if self._stale:
            self._cloud = backward_cloud(self.window.values)
            self._stale = False
        return self._cloud


class TrustStore:
    """Per-target trust bookkeeping for a single observer."""

    __slots__ = ("window_size", "_records", "immature")

    def __init__(self, window_size: int = THR_DRP):
        self.window_size = window_size
        self._records: dict[int, TargetRecord] = {}
        #: targets recorded but without a full window yet
        self.immature: set[int] = set()

    def record(self, target: int) -> TargetRecord:
        rec = self._records.get(target)
        if rec is None:
            rec = TargetRecord(self.window_size)
            self._records[target] = rec
            self.immature.add(target)
        return rec

    def get(self, target: int) -> Optional[TargetRecord]:
        return self._records.get(target)

    def mean_trust(self, target: int) -> float:
        rec = self._records.get(target)
        return rec.mean if rec is not None else 0.0

    def firsthand_trust(self, target: int) -> Optional[float]:
        rec = self._records.get(target)
        return rec.firsthand_value if rec is not None else None

    def has_cloud(self, target: int) -> bool:
        rec = self._records.get(target)
        return rec is not None and rec.window.full

    def cloud(self, target: int) -> Optional[TrustCloud]:
        rec = self._records.get(target)
        return rec.cloud if rec is not None else None

    def known(self):
        """View of all recorded target ids."""
        return self._records.keys()

    def targets(self) -> list[int]:
        return sorted(self._records)


def recommend_trust(t_ik: float, t_jk: float, t_ij: float) -> float:
    """Fuse own trust in a target with a head's recommended trust.

    With no prior record of the target (t_ik = 0) the recommendation is
    weighted by the trust in the recommender alone; otherwise it averages in
    against the own estimate.
    """
    for name, v in (("t_ik", t_ik), ("t_jk", t_jk), ("t_ij", t_ij)):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"{name} must be in [0, 1], got {v}")
    if t_ik > 0.0:
        return (t_ik + t_jk * t_ij) / (1.0 + t_ij)
    return t_jk * t_ij


def record_trust(
    store: TrustStore, target: int, value: float, *, direct: bool = False
) -> TrustStore:
    """Slide a trust value into a target's window and refresh its summary.

    Directly inferred values additionally extend the first-hand window that
    backs outgoing recommendations.
    """
    rec = store.record(target)
    evicted = rec.window.add(value)
    rec._sum += value - (evicted or 0.0)
    if direct:
        fh_evicted = rec.firsthand.add(value)
        rec._fh_sum += value - (fh_evicted or 0.0)
        rec.firsthand_value = rec._fh_sum / len(rec.firsthand)
    rec.interacted = True
    rec.mean = rec._sum / len(rec.window)
    if rec.window.full:
        rec._stale = True
        store.immature.discard(target)
    return store


def classify(
    itc: TrustCloud,
    std: StandardClouds,
    rng: Random,
    *,
    kappa: float = MARGIN_KAPPA,
    n_drp: int = DEFAULT_SIMILARITY_DROPS,
) -> Classification:
    """Decide whether an individual trust cloud looks malicious or normal.

    An expectation clearly below the malicious cloud (by kappa entropies) is
    malicious, clearly above the normal cloud is normal; anything in between
    is resolved by comparing drop-sampled similarities, with ties breaking to
    malicious as the fail-safe.

    The two similarities are compared under a shared membership dispersion
    pooled from both standard clouds.  The update pools give the two
    standards very different entropies (attacker behavior spans classes,
    normal behavior is homogeneous), and under the raw membership law a
    sufficiently wide cloud outscores a tight one even at the tight cloud's
    own center; pooling the dispersion keeps the comparison a proximity
    judgement.  With equal-entropy standards this is the plain comparison.
    """
    if itc is None:
        raise InsufficientEvidenceError("no individual trust cloud for target")
    if itc.ex < std.malicious.ex - kappa * std.malicious.en:
        return Classification.MALICIOUS
    if itc.ex > std.normal.ex + kappa * std.normal.en:
        return Classification.NORMAL
    shared = TrustCloud(
        0.0,
        (std.malicious.en + std.normal.en) / 2.0,
        (std.malicious.he + std.normal.he) / 2.0,
    )
    sim_m = 0.0
    sim_n = 0.0
    for _ in range(n_drp):
        drop = generate_drop(itc, rng)
        sigma_s = abs(rng.gauss(shared.en, shared.he))
        sim_m += _membership_at(drop, std.malicious.ex, sigma_s)
        sim_n += _membership_at(drop, std.normal.ex, sigma_s)
    if sim_m >= sim_n:
        return Classification.MALICIOUS
    return Classification.NORMAL


def _membership_at(drop: float, center: float, sigma_s: float) -> float:
    if drop == center:
        return 1.0
    if sigma_s == 0.0:
        raise ZeroEntropyError("zero pooled entropy with a non-matching drop")
    return math.exp(-((drop - center) ** 2) / (2.0 * sigma_s * sigma_s))


def classify_batch(
    itcs: list[TrustCloud],
    stds: list[StandardClouds],
    np_rng,
    *,
    kappa: float = MARGIN_KAPPA,
    n_drp: int = DEFAULT_SIMILARITY_DROPS,
) -> list[Classification]:
    """Classify many (individual, standards) pairs with vectorized sampling.

    Decision logic matches classify(); the similarity sampling uses one numpy
    generator so a round's worth of decisions costs a handful of array ops.
    """
    out: list[Optional[Classification]] = [None] * len(itcs)
    gray: list[int] = []
    for i, (itc, std) in enumerate(zip(itcs, stds)):
        if itc.ex < std.malicious.ex - kappa * std.malicious.en:
            out[i] = Classification.MALICIOUS
        elif itc.ex > std.normal.ex + kappa * std.normal.en:
            out[i] = Classification.NORMAL
        else:
            gray.append(i)
    if gray:
        shape = (len(gray), n_drp)
        ex_i = np.array([itcs[i].ex for i in gray])[:, None]
        en_i = np.array([itcs[i].en for i in gray])[:, None]
        he_i = np.array([itcs[i].he for i in gray])[:, None]
        ex_m = np.array([stds[i].malicious.ex for i in gray])[:, None]
        ex_n = np.array([stds[i].normal.ex for i in gray])[:, None]
        en_p = np.array(
            [(stds[i].malicious.en + stds[i].normal.en) / 2.0 for i in gray]
        )[:, None]
        he_p = np.array(
            [(stds[i].malicious.he + stds[i].normal.he) / 2.0 for i in gray]
        )[:, None]
        sigma_i = np.abs(np_rng.standard_normal(shape) * he_i + en_i)
        drops = np.clip(np_rng.standard_normal(shape) * sigma_i + ex_i, 0.0, 1.0)
        sigma_s = np.abs(np_rng.standard_normal(shape) * he_p + en_p)
        if np.any((sigma_s == 0.0) & (drops != ex_m) & (drops != ex_n)):
            raise ZeroEntropyError("zero pooled entropy in classification batch")
        denom = np.where(sigma_s == 0.0, 1.0, 2.0 * sigma_s * sigma_s)
        sim_m = np.where(
            drops == ex_m, 1.0, np.exp(-((drops - ex_m) ** 2) / denom)
        ).mean(axis=1)
        sim_n = np.where(
            drops == ex_n, 1.0, np.exp(-((drops - ex_n) ** 2) / denom)
        ).mean(axis=1)
        for j, i in enumerate(gray):
            out[i] = (
                Classification.MALICIOUS
                if sim_m[j] >= sim_n[j]
                else Classification.NORMAL
            )
    return out  # type: ignore[return-value]


def update_standard_cloud(
    prior: TrustCloud,
    fresh: TrustCloud,
    alpha: float = UPDATE_ALPHA,
    beta: float = UPDATE_BETA,
) -> TrustCloud:
    """Blend a freshly estimated standard cloud into the prior one."""
    if abs(alpha + beta - 1.0) > 1e-9:
        raise ConfigError(f"weights must sum to 1, got {alpha} + {beta}")
    return TrustCloud(
        alpha * prior.ex + beta * fresh.ex,
        alpha * prior.en + beta * fresh.en,
        alpha * prior.he + beta * fresh.he,
    )


@dataclass
class UpdateAccumulators:
    """Pools of classified trust values pending a standard-cloud refresh."""

    malicious_pool: DropSet = field(default_factory=lambda: DropSet(POOL_CAPACITY))
    normal_pool: DropSet = field(default_factory=lambda: DropSet(POOL_CAPACITY))


def accumulate_and_maybe_update(
    acc: UpdateAccumulators,
    classification: Classification,
    value: float,
    std: StandardClouds,
    *,
    alpha: float = UPDATE_ALPHA,
    beta: float = UPDATE_BETA,
) -> tuple[UpdateAccumulators, StandardClouds]:
    """Pool a classified trust value; refresh the matching cloud when full."""
    pool = (
        acc.malicious_pool
        if classification is Classification.MALICIOUS
        else acc.normal_pool
    )
    pool.add(value)
    if pool.full:
        fresh = backward_cloud(pool.values)
        if classification is Classification.MALICIOUS:
            std = StandardClouds(
                update_standard_cloud(std.malicious, fresh, alpha, beta), std.normal
            )
        else:
            std = StandardClouds(
                std.malicious, update_standard_cloud(std.normal, fresh, alpha, beta)
            )
        pool.clear()
    return acc, std
