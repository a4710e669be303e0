"""Multi-UAV relay environment on a waypoint graph.

UAVs hop between adjacent waypoints (or hover), collect IoT uplink data when
they arrive at a waypoint, and hand everything they carry to the ground
station ``b`` over the mmWave backhaul whenever ``b`` is within range.
Joint actions index a mixed-radix product of per-UAV moves: local move 0 is
hover, local move ``k`` is the ``k``-th neighbour in ascending id order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import channel as ch
from .aoi import AoiTable
from .config import ScenarioConfig
from .energy import (EnergyLedger, backhaul_energy, flight_distance, mobility_energy,
                     propulsion_power, step_ratio)


class InfeasibleActionError(ValueError):
    pass


class GraphError(RuntimeError):
    pass


# -- graph -------------------------------------------------------------------

@dataclass
class WaypointGraph:
    positions: np.ndarray
    neighbors: tuple
    devices: np.ndarray
    base: int = 0

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=float)
        self.devices = np.asarray(self.devices, dtype=np.int64)
        self.neighbors = tuple(tuple(sorted(int(q) for q in nb)) for nb in self.neighbors)
        n = len(self.positions)
        if len(self.neighbors) != n or len(self.devices) != n:
            raise GraphError("positions, neighbors and devices must have one entry per waypoint")
        if not 0 <= self.base < n:
            raise GraphError("ground BS must be one of the waypoints")
        for p, nb in enumerate(self.neighbors):
            if p in nb:
                raise GraphError(f"waypoint {p} lists itself as a neighbour")
            for q in nb:
                if p not in self.neighbors[q]:
                    raise GraphError(f"link {p}-{q} is not symmetric")
        if np.any(self.devices < 0):
            raise GraphError("device counts must be non-negative")
        if not self.is_connected():
            raise GraphError("waypoint graph is not connected")
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        self.distances = np.sqrt((diff ** 2).sum(axis=-1))
        self.adjacency = np.zeros((n, n), dtype=bool)
        for p, nb in enumerate(self.neighbors):
            self.adjacency[p, list(nb)] = True

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def max_degree(self) -> int:
        return max(len(nb) for nb in self.neighbors)

    @property
    def base_neighbors(self) -> tuple:
        return self.neighbors[self.base]

    @property
    def sources(self) -> np.ndarray:
        """Every waypoint except the ground BS."""
        return np.array([p for p in range(self.n) if p != self.base], dtype=np.int64)

    def is_connected(self) -> bool:
        seen = {self.base}
        frontier = [self.base]
        while frontier:
            p = frontier.pop()
            for q in self.neighbors[p]:
                if q not in seen:
                    seen.add(q)
                    frontier.append(q)
        return len(seen) == len(self.neighbors)

    @classmethod
    def random(cls, config: ScenarioConfig, seed, max_tries: int = 200_000) -> "WaypointGraph":
        """Random geometric graph, re-sampled until connected; waypoint 0 is the BS."""
        rng = np.random.default_rng(seed)
        n = config.n_waypoints
        for _ in range(max_tries):
            pts = rng.uniform((0.0, 0.0), (config.area_x, config.area_y), size=(n, 2))
            d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
            adj = (d <= config.coverage_radius) & ~np.eye(n, dtype=bool)
            neighbors = tuple(tuple(np.flatnonzero(adj[p])) for p in range(n))
            if _connected(neighbors):
                break
        else:
            raise GraphError(f"no connected graph after {max_tries} draws")
        weights = np.full(n - 1, 1.0 / (n - 1))
        devices = np.concatenate([[0], rng.multinomial(config.n_devices, weights)])
        return cls(positions=pts, neighbors=neighbors, devices=devices, base=0)

    def to_dict(self) -> dict:
        return {"positions": self.positions.tolist(), "neighbors": [list(nb) for nb in self.neighbors],
                "devices": self.devices.tolist(), "base": self.base}

    @classmethod
    def from_dict(cls, data: dict) -> "WaypointGraph":
        return cls(positions=data["positions"], neighbors=data["neighbors"],
                   devices=data["devices"], base=data["base"])


def _connected(neighbors) -> bool:
    seen = {0}
    frontier = [0]
    while frontier:
        for q in neighbors[frontier.pop()]:
            if q not in seen:
                seen.add(int(q))
                frontier.append(int(q))
    return len(seen) == len(neighbors)


# -- state -------------------------------------------------------------------

@dataclass
class WorldState:
    t: int
    positions: np.ndarray
    heights: np.ndarray
    visited: np.ndarray            # (U, P) bool, the per-UAV trajectory sets
    pending: np.ndarray            # (U, P) visit slot of undelivered data, -1 if none
    aoi: AoiTable
    eta_sum: float = 0.0
    eta_step: float = 0.0
    aoi_norm: float = 0.0
    mobility_energy: np.ndarray = field(default=None)
    backhaul_energy: np.ndarray = field(default=None)
    uplink_bits: np.ndarray = field(default=None)
    backhaul_bits: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        u = len(self.positions)
        for name in ("mobility_energy", "backhaul_energy", "uplink_bits", "backhaul_bits"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(u))

    @property
    def eta(self) -> float:
        """Running mean of the per-slot normalised efficiency."""
        return self.eta_sum / self.t if self.t else 0.0

    @property
    def n_uavs(self) -> int:
        return len(self.positions)

    def copy(self) -> "WorldState":
        return WorldState(
            t=self.t, positions=self.positions.copy(), heights=self.heights,
            visited=self.visited.copy(), pending=self.pending.copy(), aoi=self.aoi.copy(),
            eta_sum=self.eta_sum, eta_step=self.eta_step, aoi_norm=self.aoi_norm,
            mobility_energy=self.mobility_energy.copy(), backhaul_energy=self.backhaul_energy.copy(),
            uplink_bits=self.uplink_bits.copy(), backhaul_bits=self.backhaul_bits.copy(),
        )

    def snapshot(self) -> dict:
        return {
            "t": self.t, "positions": self.positions.tolist(), "heights": self.heights.tolist(),
            "visited": self.visited.astype(int).tolist(), "pending": self.pending.tolist(),
            "ages": self.aoi.ages.tolist(), "eta_sum": self.eta_sum, "aoi_norm": self.aoi_norm,
            "mobility_energy": self.mobility_energy.tolist(),
            "backhaul_energy": self.backhaul_energy.tolist(),
        }


@dataclass(frozen=True)
class ConstraintFlags:
    """Constraint outcomes. ``coverage`` is only judged at episode end."""

    trajectory: bool
    coverage: bool
    efficiency: bool
    freshness: bool
    coverage_progress: float = 1.0

    def as_dict(self) -> dict:
        return {"trajectory": self.trajectory, "coverage": self.coverage,
                "efficiency": self.efficiency, "freshness": self.freshness}

    @property
    def all_hold(self) -> bool:
        return self.trajectory and self.coverage and self.efficiency and self.freshness


@dataclass
class StepInfo:
    reward: float
    done: bool
    flags: ConstraintFlags
    eta_step: float
    destinations: np.ndarray
    uplink: np.ndarray
    backhaul: np.ndarray
    backhaul_energy: np.ndarray
    mobility_energy: np.ndarray
    served_devices: np.ndarray
    delivered: int


def check_constraints(state: WorldState, graph: WaypointGraph, eta_threshold: float,
                      aoi_threshold: float, final: bool = False) -> ConstraintFlags:
    b = graph.base
    pos = state.positions
    off_base = pos[pos != b]
    trajectory = len(np.unique(off_base)) == len(off_base)
    if trajectory and state.n_uavs > 1:
        owners = state.visited.sum(axis=0)
        owners[b] = 0
        trajectory = bool(np.all(owners <= 1))
    covered = state.visited.any(axis=0)
    progress = float(covered.mean())
    coverage = bool(covered.all()) if final else True
    efficiency = state.eta >= eta_threshold
    freshness = state.aoi_norm <= aoi_threshold
    return ConstraintFlags(bool(trajectory), coverage, bool(efficiency), bool(freshness), progress)


def reward_from_flags(flags: ConstraintFlags, eta_step: float, alpha1: float) -> float:
    """Immediate reward: alpha1 * eta if all constraints hold, -alpha1 on a trajectory,
    coverage or efficiency violation, 0 when only freshness fails."""
    if not (flags.trajectory and flags.coverage and flags.efficiency):
        return -alpha1
    if not flags.freshness:
        return 0.0
    return alpha1 * eta_step


def reference_efficiency(config: ScenarioConfig) -> float:
    """Rate-per-energy of one UAV collecting an average waypoint after a full-radius hop.

    Used as the half-saturation point of the normalised efficiency.
    """
    if config.eta_reference > 0:
        return config.eta_reference
    params = config.channel_params()
    h = 0.5 * (config.height_min + config.height_max)
    devices = config.n_devices / (config.n_waypoints - 1)
    geom = ch.LinkGeometry.from_offsets(0.0, h)
    sinr = ch.uplink_sinr(geom, [], params)
    uplink = devices * ch.uplink_rate(sinr, config.n_devices, params)
    energy = mobility_energy(flight_distance(config.coverage_radius, h), config.propulsion())
    return uplink / energy


# -- environment --------------------------------------------------------------

class UavRelayEnv:
    """Discrete-slot simulator; one instance per run, ``reset`` per episode."""

    def __init__(self, config: ScenarioConfig, graph: WaypointGraph, record_trace: bool = False):
        if config.n_uavs > graph.n:
            raise ValueError("more UAVs than waypoints")
        self.config = config
        self.graph = graph
        self.params = config.channel_params()
        self.record_trace = record_trace
        self.eta_ref = reference_efficiency(config)
        self.n_uavs = config.n_uavs
        self.n_local = graph.max_degree + 1
        self.n_actions = self.n_local ** self.n_uavs
        self.joint_local = np.indices((self.n_local,) * self.n_uavs).reshape(self.n_uavs, -1).T
        # options[p, k] = destination of local move k at p, -1 if absent
        self.options = np.full((graph.n, self.n_local), -1, dtype=np.int64)
        for p, nb in enumerate(graph.neighbors):
            self.options[p, 0] = p
            self.options[p, 1:len(nb) + 1] = nb
        self.near_base = graph.distances[graph.base] <= self.params.backhaul_range
        self.hover_energy = propulsion_power(config.propulsion(config.hover_velocity)) * config.slot_duration
        self.cruise = config.propulsion()
        self.sources = graph.sources
        self.rng = np.random.default_rng(0)
        self.state: WorldState | None = None
        self.ledger: EnergyLedger | None = None
        self.trace: list[dict] = []
        self.aoi_trace: list[tuple[int, int, int]] = []
        self.episode_seed = None

    @property
    def n_features(self) -> int:
        return 2 * self.n_uavs + 4

    # -- episode control -------------------------------------------------------
    def reset(self, seed=None) -> WorldState:
        self.episode_seed = seed
        self.rng = np.random.default_rng(seed)
        cfg, g = self.config, self.graph
        starts = self.rng.choice(g.n, size=self.n_uavs, replace=False)
        heights = self.rng.uniform(cfg.height_min, cfg.height_max, size=self.n_uavs)
        visited = np.zeros((self.n_uavs, g.n), dtype=bool)
        visited[np.arange(self.n_uavs), starts] = True
        visited[:, g.base] = True
        self.state = WorldState(
            t=0, positions=starts.astype(np.int64), heights=heights, visited=visited,
            pending=np.full((self.n_uavs, g.n), -1, dtype=np.int64),
            aoi=AoiTable(g.n),
        )
        self._build_link_tables(heights)
        self.ledger = EnergyLedger(self.n_uavs)
        self.trace = []
        self.aoi_trace = []
        return self.state

    def _build_link_tables(self, heights: np.ndarray) -> None:
        g, params = self.graph, self.params
        U, P = self.n_uavs, g.n
        # power[u, p, q, c]: effective received power at UAV u over p from one device at q
        self.p_los = np.zeros((U, P, P))
        self.power = np.zeros((U, P, P, 2))
        self.backhaul_rate = np.zeros((U, P))
        self.move_energy = np.zeros((U, P, P))
        for u, h in enumerate(heights):
            for p in range(P):
                for q in (p,) + g.neighbors[p]:
                    geom = ch.LinkGeometry.from_offsets(float(g.distances[p, q]), float(h))
                    p_los, p_nlos = ch.los_probability(geom, params)
                    self.p_los[u, p, q] = p_los
                    for c, kind, zeta in ((0, ch.LOS, p_los), (1, ch.NLOS, p_nlos)):
                        self.power[u, p, q, c] = ch.received_power(geom, kind, params) / 10.0 ** (zeta / 10.0)
                    if q != p:
                        self.move_energy[u, p, q] = mobility_energy(
                            flight_distance(float(g.distances[p, q]), float(h)), self.cruise)
                geom_b = ch.LinkGeometry.from_offsets(float(g.distances[p, g.base]), float(h))
                self.backhaul_rate[u, p] = ch.backhaul_rate(geom_b, params)

    def draw_channels(self) -> np.ndarray:
        """Uniform draws deciding LoS/NLoS of every (UAV, source waypoint) link this slot."""
        return self.rng.random((self.n_uavs, self.graph.n))

    # -- actions -----------------------------------------------------------------
    def destinations(self, state: WorldState, action: int) -> np.ndarray:
        local = self.joint_local[action]
        return self.options[state.positions, local]

    def action_mask(self, state: WorldState | None = None) -> np.ndarray:
        state = self.state if state is None else state
        b = self.graph.base
        dest = self.options[state.positions[None, :], self.joint_local]  # (A, U)
        ok = np.all(dest >= 0, axis=1)
        safe = np.where(dest >= 0, dest, 0)
        if self.config.exclusive_territories and self.n_uavs > 1:
            owned_by = state.visited.copy()
            owned_by[:, b] = False
            claimed = owned_by.sum(axis=0)
            # a UAV may enter b, its own waypoints, or unclaimed ones
            mine = owned_by[np.arange(self.n_uavs)[None, :], safe]
            ok &= np.all(mine | (claimed[safe] == 0) | (safe == b), axis=1)
        for u in range(self.n_uavs):
            for v in range(u + 1, self.n_uavs):
                ok &= ~((safe[:, u] == safe[:, v]) & (safe[:, u] != b))
        return ok

    def enumerate_actions(self, state: WorldState | None = None) -> list:
        """Feasible joint actions as tuples of per-UAV destinations, indexed like the mask."""
        state = self.state if state is None else state
        mask = self.action_mask(state)
        return [(int(a), tuple(int(d) for d in self.destinations(state, a))) for a in np.flatnonzero(mask)]

    def action_of(self, destinations: Sequence[int], state: WorldState | None = None) -> int:
        """Joint action index that sends each UAV to ``destinations[u]``."""
        state = self.state if state is None else state
        local = []
        for u, d in enumerate(destinations):
            hits = np.flatnonzero(self.options[state.positions[u]] == d)
            if hits.size == 0:
                raise InfeasibleActionError(f"UAV {u} cannot reach waypoint {d}")
            local.append(int(hits[0]))
        return int(np.ravel_multi_index(local, (self.n_local,) * self.n_uavs))

    # -- dynamics ------------------------------------------------------------------
    def transition(self, state: WorldState, action: int, draws: np.ndarray,
                   check: bool = True) -> tuple[WorldState, StepInfo]:
        """Pure one-slot transition; ``state`` is left untouched."""
        cfg, g, params = self.config, self.graph, self.params
        if check and not (0 <= action < self.n_actions and self.action_mask(state)[action]):
            raise InfeasibleActionError(f"joint action {action} is not feasible in slot {state.t}")
        U = self.n_uavs
        uavs = range(U)
        s = state.copy()
        t1 = s.t + 1
        pos = s.positions
        dest = self.options[pos, self.joint_local[action]]
        moved = dest != pos

        mob = np.array([self.move_energy[u, pos[u], dest[u]] if moved[u] else self.hover_energy
                        for u in uavs])
        collecting = [u for u in uavs if moved[u] and g.devices[dest[u]] > 0]
        uplink = np.zeros(U)
        served = np.zeros(U, dtype=np.int64)
        for u in collecting:
            p = dest[u]
            c = int(draws[u, p] >= self.p_los[u, p, p])
            signal = self.power[u, p, p, c]
            interference = 0.0
            for v in collecting:
                q = dest[v]
                if v != u and g.adjacency[p, q]:
                    cq = int(draws[u, q] >= self.p_los[u, p, q])
                    interference += g.devices[q] * self.power[u, p, q, cq]
            rate = ch.uplink_rate(signal / (interference + params.noise_power), cfg.n_devices, params)
            if rate > 0:
                uplink[u] = g.devices[p] * rate
                served[u] = g.devices[p]
                s.pending[u, p] = t1
        s.visited[np.arange(U), dest] = True
        s.positions = dest
        s.t = t1
        s.aoi.tick(t1)

        bh_rate = np.zeros(U)
        bh_energy = np.zeros(U)
        delivered = 0
        slot = cfg.slot_duration if cfg.airtime_backhaul_energy else None
        for u in uavs:
            rate = self.backhaul_rate[u, dest[u]]
            carried = np.flatnonzero(s.pending[u] >= 0)
            if rate > 0 and carried.size:
                bh_rate[u] = rate
                bh_energy[u] = backhaul_energy(rate, params, slot_duration=slot)
                for p in carried:
                    s.aoi.record_delivery(int(p), t1, int(s.pending[u, p]))
                delivered += carried.size
                s.pending[u, :] = -1

        total = sum(step_ratio(bh_rate[u], uplink[u], bh_energy[u], mob[u]) for u in uavs)
        eta_step = total / (total + self.eta_ref)
        s.eta_step = eta_step
        s.eta_sum += eta_step
        s.aoi_norm = s.aoi.average_aoi(waypoints=self.sources) / cfg.effective_aoi_scale
        s.mobility_energy = s.mobility_energy + mob
        s.backhaul_energy = s.backhaul_energy + bh_energy
        s.uplink_bits = s.uplink_bits + uplink * cfg.slot_duration
        s.backhaul_bits = s.backhaul_bits + bh_rate * cfg.slot_duration

        terminal = bool(s.visited.any(axis=0).all() and np.all(self.near_base[dest]))
        done = terminal or t1 >= cfg.horizon
        flags = check_constraints(s, g, cfg.eta_threshold, cfg.aoi_threshold, final=done)
        reward = reward_from_flags(flags, eta_step, cfg.alpha1)
        info = StepInfo(reward=reward, done=done, flags=flags, eta_step=eta_step, destinations=dest,
                        uplink=uplink, backhaul=bh_rate, backhaul_energy=bh_energy,
                        mobility_energy=mob, served_devices=served, delivered=delivered)
        return s, info

    def apply(self, action: int, draws: np.ndarray) -> tuple[WorldState, float, bool, StepInfo]:
        if self.state is None:
            raise RuntimeError("call reset() first")
        action = int(action)
        new_state, info = self.transition(self.state, action, draws)
        self.ledger.record(info.destinations, info.uplink, info.backhaul, info.backhaul_energy,
                           info.mobility_energy)
        if self.record_trace:
            self.trace.append(trace_record(new_state, action, info))
            self.aoi_trace.extend((new_state.t, int(p), int(new_state.aoi.ages[p])) for p in self.sources)
        self.state = new_state
        return new_state, info.reward, info.done, info

    def step(self, action: int) -> tuple[WorldState, float, bool, StepInfo]:
        return self.apply(action, self.draw_channels())

    # -- observation ---------------------------------------------------------------
    def encode_state(self, state: WorldState | None = None) -> np.ndarray:
        state = self.state if state is None else state
        cfg, g = self.config, self.graph
        scale = np.array([cfg.area_x, cfg.area_y])
        coords = g.positions[state.positions] / scale
        target = g.positions[g.base] / scale
        eta = min(max(state.eta / cfg.eta_cap, 0.0), 1.0)
        aoi = min(max(state.aoi_norm, 0.0), 1.0)
        return np.clip(np.concatenate([coords.ravel(), target, [eta, aoi]]), 0.0, 1.0)

    def constraint_flags(self, final: bool = False) -> ConstraintFlags:
        return check_constraints(self.state, self.graph, self.config.eta_threshold,
                                 self.config.aoi_threshold, final=final)


def trace_record(state: WorldState, action: int, info: StepInfo) -> dict:
    return {
        "slot": state.t,
        "positions": [int(p) for p in state.positions],
        "action": int(action),
        "reward": float(info.reward),
        "eta": float(state.eta),
        "eta_step": float(info.eta_step),
        "aoi": float(state.aoi_norm),
        "flags": info.flags.as_dict(),
        "served": int(info.served_devices.sum()),
        "uplink_bits": float(info.uplink.sum()),
        "delivered": int(info.delivered),
        "done": bool(info.done),
    }


def make_env(config: ScenarioConfig, seed: int, record_trace: bool = False) -> UavRelayEnv:
    """Environment whose graph and device layout are fixed by the run seed."""
    graph = WaypointGraph.random(config, [int(seed), 0])
    return UavRelayEnv(config, graph, record_trace=record_trace)


def episode_seed(run_seed: int, stream: int, episode: int) -> list:
    """Seed material for one episode; stream 1 = training, 2 = evaluation."""
    return [int(run_seed), int(stream), int(episode)]
