"""Per-waypoint age-of-information table kept at the ground station."""

from __future__ import annotations

from typing import Iterable

import numpy as np


class OutOfOrderError(ValueError):
    pass


class AoiTable:
    """Ages in slots for ``n_waypoints`` sources.

    ``last_update[p]`` is the generation slot of the freshest packet from ``p``
    that reached the station (0 before any delivery, so age(p, t) = t).
    ``age_sums[p]`` accumulates age(p, s) for s = 1..t.
    """

    def __init__(self, n_waypoints: int):
        if n_waypoints < 1:
            raise ValueError("need at least one waypoint")
        self.n_waypoints = n_waypoints
        self.slot = 0
        self.last_update = np.zeros(n_waypoints, dtype=np.int64)
        self.ages = np.zeros(n_waypoints, dtype=np.int64)
        self.age_sums = np.zeros(n_waypoints, dtype=np.int64)

    def copy(self) -> "AoiTable":
        new = AoiTable.__new__(AoiTable)
        new.n_waypoints = self.n_waypoints
        new.slot = self.slot
        new.last_update = self.last_update.copy()
        new.ages = self.ages.copy()
        new.age_sums = self.age_sums.copy()
        return new

    def tick(self, t: int) -> "AoiTable":
        if t != self.slot + 1:
            raise OutOfOrderError(f"tick to slot {t} from slot {self.slot}")
        self.slot = t
        self.ages = t - self.last_update
        self.age_sums += self.ages
        return self

    def record_delivery(self, p: int, t: int, generated: int | None = None) -> "AoiTable":
        """Deliver at slot ``t`` a packet from ``p`` generated at slot ``generated``.

        Just-in-time by default: the packet is generated in the delivery slot.
        Call after :meth:`tick` for slot ``t``; the slot's age sum is corrected.
        """
        if t < self.slot:
            raise OutOfOrderError(f"delivery at slot {t} but table is at slot {self.slot}")
        if t > self.slot:
            raise OutOfOrderError(f"delivery at slot {t} before the table reached it")
        generated = t if generated is None else generated
        if generated > t or generated < 0:
            raise ValueError("packet generated outside [0, t]")
        if generated <= self.last_update[p]:
            return self
        self.last_update[p] = generated
        new_age = t - generated
        self.age_sums[p] += new_age - self.ages[p]
        self.ages[p] = new_age
        return self

    def age(self, p: int) -> int:
        return int(self.ages[p])

    def average_aoi(self, horizon: int | None = None, waypoints: Iterable[int] | None = None) -> float:
        """Mean age over slots 1..horizon and the given waypoints.

        ``horizon`` defaults to the current slot and must not exceed it.
        """
        horizon = self.slot if horizon is None else horizon
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if horizon != self.slot:
            raise ValueError("running sums only cover the elapsed slots")
        idx = np.arange(self.n_waypoints) if waypoints is None else np.fromiter(waypoints, dtype=np.int64)
        if idx.size == 0:
            raise ValueError("empty waypoint set")
        return float(self.age_sums[idx].sum()) / (horizon * idx.size)


def average_aoi_from_log(deliveries: Iterable[tuple[int, int, int]], n_waypoints: int,
                         horizon: int, waypoints: Iterable[int] | None = None) -> float:
    """Recompute the average age from a delivery log ``(slot, waypoint, generated)``."""
    by_slot: dict[int, list[tuple[int, int]]] = {}
    for t, p, g in deliveries:
        by_slot.setdefault(t, []).append((p, g))
    current = np.zeros(n_waypoints, dtype=np.int64)
    total = 0
    idx = list(range(n_waypoints)) if waypoints is None else list(waypoints)
    for t in range(1, horizon + 1):
        for p, g in by_slot.get(t, []):
            current[p] = max(current[p], g)
        total += sum(t - current[p] for p in idx)
    return total / (horizon * len(idx))
