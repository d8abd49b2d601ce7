"""Wireless channel quality and the first-order radio energy model.

Channel quality is bad with the stationary probability alpha0/(alpha0+alpha1)
and every reception or overhearing opportunity draws independently: a bad
draw means the packet is not received or overheard.  Energy accounting uses
the standard first-order radio model with a free-space / multipath amplifier
crossover at d0 = sqrt(eps_fs / eps_amp).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from random import Random

from .errors import DomainError


@dataclass(frozen=True)
class ChannelPhase:
    """One segment of the channel schedule, active from start_round on."""

    alpha0: float
    alpha1: float
    start_round: int = 0

    def __post_init__(self):
        if self.alpha0 < 0 or self.alpha1 < 0 or self.alpha0 + self.alpha1 <= 0:
            raise DomainError(
                f"need non-negative rates with a positive sum, got "
                f"({self.alpha0}, {self.alpha1})"
            )

    @property
    def bad_prob(self) -> float:
        return stationary_bad_prob(self.alpha0, self.alpha1)


def stationary_bad_prob(alpha0: float, alpha1: float) -> float:
    """Stationary probability of the bad channel state."""
    if alpha0 < 0 or alpha1 < 0 or alpha0 + alpha1 <= 0:
        raise DomainError(
            f"need non-negative rates with a positive sum, got ({alpha0}, {alpha1})"
        )
    return alpha0 / (alpha0 + alpha1)


def channel_ok(device_id: int | None, phase: ChannelPhase, rng: Random) -> bool:
    """One independent reception/overhearing opportunity for a device.

    Each opportunity draws independently at the stationary bad probability,
    so per-device channel quality is independent by construction; device_id
    is accepted for interface symmetry and diagnostics only.
    """
    del device_id
    p0 = phase.bad_prob
    if p0 == 0.0:
        return True
    return rng.random() >= p0


@dataclass(frozen=True)
class EnergyParams:
    """Radio and bookkeeping energy constants, all in joules."""

    e_elec: float = 50e-9       # per bit, transmit/receive electronics
    eps_fs: float = 10e-12      # per bit per m^2, free-space amplifier
    eps_amp: float = 0.0013e-12  # per bit per m^4, multipath amplifier
    e_da: float = 5e-9          # per bit per message, aggregation
    e_h: float = 5e-9           # per bit, overhearing
    e_m: float = 10e-9          # per second, monitoring
    e0: float = 1.0             # initial budget per device

    def __post_init__(self):
        for name in ("e_elec", "eps_fs", "eps_amp", "e_da", "e_h", "e_m", "e0"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")

    @property
    def crossover_distance(self) -> float:
        """Distance beyond which the multipath amplifier term applies."""
        if self.eps_amp == 0.0:
            return math.inf
        return math.sqrt(self.eps_fs / self.eps_amp)


def tx_energy(bits: int, distance: float, p: EnergyParams) -> float:
    """Transmit cost over a given distance."""
    if bits < 0 or distance < 0:
        raise DomainError("bits and distance must be non-negative")
    if distance < p.crossover_distance:
        return bits * p.e_elec + bits * p.eps_fs * distance**2
    return bits * p.e_elec + bits * p.eps_amp * distance**4


def rx_energy(bits: int, p: EnergyParams) -> float:
    return bits * p.e_elec


def overhear_energy(bits: int, p: EnergyParams) -> float:
    return bits * p.e_h


def aggregate_energy(bits: int, messages: int, p: EnergyParams) -> float:
    return bits * messages * p.e_da


def monitor_energy(seconds: float, p: EnergyParams) -> float:
    return seconds * p.e_m
