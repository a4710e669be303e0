"""Scenario configuration: defaults, INI-style load/save, derived parameter objects."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .channel import ChannelParams, db_to_linear, dbm_to_watts
from .energy import PropulsionParams

# key -> section, used only for (de)serialization
SECTIONS = {
    "scenario": (
        "n_uavs", "n_waypoints", "n_devices", "area_x", "area_y", "height_min", "height_max",
        "coverage_radius", "velocity_max", "acceleration_max", "cruise_velocity",
        "hover_velocity", "slot_duration", "horizon", "exclusive_territories", "aoi_scale",
    ),
    "channel": (
        "alpha", "alpha_hat", "epsilon_los_db", "epsilon_nlos_db", "fc_uplink_hz", "fc_mmwave_hz",
        "bw_uplink_hz", "bw_mmwave_hz", "noise_power_dbm", "sinr_threshold_db", "backhaul_range_m",
        "tx_power_iot_dbm", "tx_power_uav_dbm", "gain_tx_dbi", "gain_rx_dbi", "squared_friis",
        "airtime_backhaul_energy",
    ),
    "propulsion": ("k1", "k2", "gravity"),
    "objective": ("alpha1", "eta_threshold", "aoi_threshold", "eta_cap", "eta_reference"),
    "learning": (
        "gamma", "learning_rate", "hidden_sizes", "memory_capacity", "batch_size", "target_sync",
        "eps_start", "eps_end", "eps_decay_fraction", "episodes", "eval_episodes",
    ),
    "experiment": ("seeds",),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    # scenario
    n_uavs: int = 3
    n_waypoints: int = 14
    n_devices: int = 100
    area_x: float = 1000.0
    area_y: float = 1000.0
    height_min: float = 140.0
    height_max: float = 250.0
    coverage_radius: float = 300.0
    velocity_max: float = 100.0
    acceleration_max: float = 5.0
    cruise_velocity: float = 20.0
    hover_velocity: float = 1.0
    slot_duration: float = 1.0
    horizon: int = 200
    exclusive_territories: bool = True
    aoi_scale: float = 0.0  # slots; 0 means "the horizon"
    # channel
    alpha: float = 9.61
    alpha_hat: float = 0.16
    epsilon_los_db: float = 1.0
    epsilon_nlos_db: float = 20.0
    fc_uplink_hz: float = 2e9
    fc_mmwave_hz: float = 28e9
    bw_uplink_hz: float = 20e6
    bw_mmwave_hz: float = 2e9
    noise_power_dbm: float = -100.0
    sinr_threshold_db: float = 5.0
    backhaul_range_m: float = 300.0
    tx_power_iot_dbm: float = 20.0
    tx_power_uav_dbm: float = 20.0
    gain_tx_dbi: float = 10.0
    gain_rx_dbi: float = 10.0
    squared_friis: bool = False
    airtime_backhaul_energy: bool = False
    # propulsion
    k1: float = 9.26e-4
    k2: float = 2250.0
    gravity: float = 9.8
    # objective
    alpha1: float = 1.0
    eta_threshold: float = 0.3
    aoi_threshold: float = 0.7
    eta_cap: float = 1.0
    eta_reference: float = 0.0  # 0 means "derive from the scenario"
    # learning
    gamma: float = 0.7
    learning_rate: float = 1e-3
    hidden_sizes: tuple = (100, 100)
    memory_capacity: int = 200
    batch_size: int = 32
    target_sync: int = 50
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.5
    episodes: int = 100
    eval_episodes: int = 10
    # experiment
    seeds: tuple = (0, 1, 2, 3, 4)

    def __post_init__(self) -> None:
        if self.n_uavs < 1:
            raise ConfigError("need at least one UAV")
        if self.n_waypoints < 2:
            raise ConfigError("need at least two waypoints (the ground BS and one more)")
        if self.n_uavs > self.n_waypoints:
            raise ConfigError("more UAVs than waypoints")
        if self.n_devices < 1:
            raise ConfigError("need at least one IoT device")
        if not 0 < self.height_min <= self.height_max:
            raise ConfigError("height range must satisfy 0 < min <= max")
        if self.cruise_velocity > self.velocity_max or self.cruise_velocity <= 0:
            raise ConfigError("cruise velocity must lie in (0, velocity_max]")
        if self.hover_velocity <= 0:
            raise ConfigError("hover velocity floor must be > 0")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ConfigError("need 0 <= eps_end <= eps_start <= 1")
        if self.batch_size < 1 or self.memory_capacity < 1:
            raise ConfigError("batch size and memory capacity must be >= 1")
        if self.learning_rate < 0:
            raise ConfigError("learning rate must be >= 0")
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    # derived objects -------------------------------------------------------
    def channel_params(self) -> ChannelParams:
        return ChannelParams(
            alpha=self.alpha, alpha_hat=self.alpha_hat,
            epsilon_los=self.epsilon_los_db, epsilon_nlos=self.epsilon_nlos_db,
            fc_uplink=self.fc_uplink_hz, fc_mmwave=self.fc_mmwave_hz,
            bw_uplink=self.bw_uplink_hz, bw_mmwave=self.bw_mmwave_hz,
            noise_power=dbm_to_watts(self.noise_power_dbm),
            sinr_threshold=db_to_linear(self.sinr_threshold_db),
            backhaul_range=self.backhaul_range_m,
            tx_power_iot=dbm_to_watts(self.tx_power_iot_dbm),
            tx_power_uav=dbm_to_watts(self.tx_power_uav_dbm),
            gain_tx=db_to_linear(self.gain_tx_dbi), gain_rx=db_to_linear(self.gain_rx_dbi),
            squared_friis=self.squared_friis,
        )

    def propulsion(self, velocity: float | None = None) -> PropulsionParams:
        return PropulsionParams(k1=self.k1, k2=self.k2, gravity=self.gravity,
                                velocity=self.cruise_velocity if velocity is None else velocity,
                                acceleration=0.0)

    @property
    def effective_aoi_scale(self) -> float:
        return self.aoi_scale if self.aoi_scale > 0 else float(self.horizon)

    def replace(self, **changes) -> "ScenarioConfig":
        unknown = set(changes) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # text format -----------------------------------------------------------
    def dumps(self) -> str:
        parser = configparser.ConfigParser()
        values = self.to_dict()
        for section, keys in SECTIONS.items():
            parser[section] = {k: _format(values[k]) for k in keys}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "ScenarioConfig":
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        defaults = cls()
        changes = {}
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]")
            for key, raw in parser[section].items():
                if key not in SECTIONS[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                changes[key] = _parse(raw, getattr(defaults, key), key)
        return dataclasses.replace(defaults, **changes)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.loads(Path(path).read_text())


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return json.dumps(list(value))
    return str(value)


def _parse(raw: str, default, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = raw.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            value = json.loads(raw)
            if not isinstance(value, list):
                raise ValueError(raw)
            return tuple(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw
