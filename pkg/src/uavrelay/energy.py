"""Propulsion and backhaul energy, and the rate-per-energy efficiency metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .channel import ChannelParams

GRAVITY = 9.8


@dataclass(frozen=True)
class PropulsionParams:
    k1: float = 9.26e-4
    k2: float = 2250.0
    gravity: float = GRAVITY
    velocity: float = 20.0
    acceleration: float = 0.0

    def __post_init__(self) -> None:
        if not (self.k1 > 0 and self.k2 > 0 and self.gravity > 0):
            raise ValueError("k1, k2 and gravity must be > 0")
        if not (math.isfinite(self.velocity) and self.velocity > 0):
            raise ValueError(f"velocity must be > 0, got {self.velocity!r}")
        if not math.isfinite(self.acceleration):
            raise ValueError("acceleration must be finite")


def propulsion_power(params: PropulsionParams) -> float:
    v = params.velocity
    if v <= 0:
        raise ValueError("propulsion power is singular at zero velocity")
    return params.k1 * v ** 3 + (params.k2 / v) * (1.0 + params.acceleration ** 2 / params.gravity ** 2)


def flight_distance(horizontal: float, height: float) -> float:
    """Distance charged for one hop flown at constant altitude ``height``."""
    return math.sqrt(height * height + horizontal * horizontal)


def mobility_energy(distance: float, params: PropulsionParams) -> float:
    if distance < 0:
        raise ValueError("distance must be >= 0")
    return distance * propulsion_power(params)


def backhaul_energy(rate: float, params: ChannelParams, *, slot_duration: float | None = None) -> float:
    """Transmission energy of one backhaul slot.

    By default the transmit power is multiplied by the rate. Passing
    ``slot_duration`` charges power x airtime instead.
    """
    if rate < 0:
        raise ValueError("rate must be >= 0")
    if slot_duration is not None:
        return params.tx_power_uav * slot_duration if rate > 0 else 0.0
    return params.tx_power_uav * rate


def step_ratio(backhaul_rate: float, uplink_rate: float, backhaul_energy: float, mobility_energy: float) -> float:
    """Rate-per-energy of one UAV in one slot."""
    energy = backhaul_energy + mobility_energy
    if energy <= 0:
        raise ValueError("degenerate slot: zero energy spent")
    return (backhaul_rate + uplink_rate) / energy


class DegenerateWindowError(ValueError):
    """Raised when an efficiency window contains no spent energy."""


@dataclass
class EnergyLedger:
    """Per-slot, per-UAV rate and energy records plus running totals.

    Row ``t`` of each history array holds slot ``t + 1``.
    """

    n_uavs: int
    mobility_total: np.ndarray = field(init=False)
    backhaul_energy_total: np.ndarray = field(init=False)
    uplink_bits_total: np.ndarray = field(init=False)
    backhaul_bits_total: np.ndarray = field(init=False)
    _rows: list = field(init=False, default_factory=list)

    def __post_init__(self) -> None:
        self.mobility_total = np.zeros(self.n_uavs)
        self.backhaul_energy_total = np.zeros(self.n_uavs)
        self.uplink_bits_total = np.zeros(self.n_uavs)
        self.backhaul_bits_total = np.zeros(self.n_uavs)

    def record(self, waypoints: Iterable[int], uplink: np.ndarray, backhaul: np.ndarray,
               backhaul_energy: np.ndarray, mobility: np.ndarray) -> None:
        row = np.stack([np.asarray(list(waypoints), dtype=float), uplink, backhaul,
                        backhaul_energy, mobility])
        if np.any(row[1:] < 0) or not np.all(np.isfinite(row)):
            raise ValueError("ledger entries must be finite and non-negative")
        self._rows.append(row)
        self.uplink_bits_total += uplink
        self.backhaul_bits_total += backhaul
        self.backhaul_energy_total += backhaul_energy
        self.mobility_total += mobility

    @property
    def n_slots(self) -> int:
        return len(self._rows)

    def history(self) -> np.ndarray:
        """Array of shape (slots, 5, n_uavs): waypoint, uplink, backhaul, E_bh, E_mob."""
        if not self._rows:
            return np.zeros((0, 5, self.n_uavs))
        return np.stack(self._rows)


def energy_efficiency(ledger: EnergyLedger, horizon: int | None = None,
                      waypoints: Iterable[int] | None = None) -> np.ndarray:
    """Per-UAV efficiency: sum over slots of (rates) / (energies).

    Uplink rates only count while the UAV sits on a waypoint in ``waypoints``
    (all waypoints when omitted). Sum the result for the fleet objective.
    """
    hist = ledger.history()
    if horizon is not None:
        hist = hist[:horizon]
    if hist.shape[0] == 0:
        raise DegenerateWindowError("empty efficiency window")
    where, uplink, backhaul, e_bh, e_mob = (hist[:, k, :] for k in range(5))
    if waypoints is not None:
        allowed = np.isin(where, np.fromiter(waypoints, dtype=float))
        uplink = np.where(allowed, uplink, 0.0)
    energy = e_bh + e_mob
    if np.any(energy <= 0):
        raise DegenerateWindowError("a slot in the window spent no energy")
    return ((backhaul + uplink) / energy).sum(axis=0)
