"""Air-to-ground uplink and mmWave backhaul link budget.

Every function here is pure: geometry and parameters in, numbers out.
Channel-type sampling is done by the caller (the environment) so that the
random stream stays under its control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

LOS = "los"
NLOS = "nlos"

SPEED_OF_LIGHT = 299_792_458.0


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Link-budget constants. Powers, gains and thresholds are linear."""

    alpha: float = 9.61
    alpha_hat: float = 0.16
    epsilon_los: float = 1.0
    epsilon_nlos: float = 20.0
    fc_uplink: float = 2e9
    fc_mmwave: float = 28e9
    bw_uplink: float = 20e6
    bw_mmwave: float = 20 * 100e6
    noise_power: float = dbm_to_watts(-100.0)
    sinr_threshold: float = db_to_linear(5.0)
    backhaul_range: float = 300.0
    tx_power_iot: float = dbm_to_watts(20.0)
    tx_power_uav: float = dbm_to_watts(20.0)
    gain_tx: float = db_to_linear(10.0)
    gain_rx: float = db_to_linear(10.0)
    light_speed: float = SPEED_OF_LIGHT
    squared_friis: bool = False

    def __post_init__(self) -> None:
        positive = (
            "fc_uplink", "fc_mmwave", "bw_uplink", "bw_mmwave", "noise_power",
            "sinr_threshold", "backhaul_range", "tx_power_iot", "tx_power_uav",
            "gain_tx", "gain_rx", "light_speed",
        )
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        for name in ("alpha", "alpha_hat", "epsilon_los", "epsilon_nlos"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class LinkGeometry:
    horizontal_distance: float
    uav_height: float
    elevation_angle: float
    slant_distance: float

    @classmethod
    def from_offsets(cls, horizontal_distance: float, uav_height: float) -> "LinkGeometry":
        if not (math.isfinite(horizontal_distance) and math.isfinite(uav_height)):
            raise ValueError("link geometry must be finite")
        if horizontal_distance < 0 or uav_height < 0:
            raise ValueError("distances must be non-negative")
        return cls(
            horizontal_distance=horizontal_distance,
            uav_height=uav_height,
            elevation_angle=math.atan2(uav_height, horizontal_distance),
            slant_distance=math.hypot(horizontal_distance, uav_height),
        )


def _check_finite(geom: LinkGeometry) -> None:
    if not all(math.isfinite(v) for v in (geom.horizontal_distance, geom.uav_height,
                                          geom.elevation_angle, geom.slant_distance)):
        raise ValueError(f"non-finite link geometry: {geom}")


def los_probability(geom: LinkGeometry, params: ChannelParams) -> tuple[float, float]:
    """Return ``(p_los, p_nlos)`` for the elevation angle of ``geom``."""
    _check_finite(geom)
    theta_deg = math.degrees(geom.elevation_angle)
    p_los = 1.0 / (1.0 + params.alpha * math.exp(-params.alpha_hat * (theta_deg - params.alpha)))
    return p_los, 1.0 - p_los


def path_loss_db(geom: LinkGeometry, channel: str, params: ChannelParams) -> float:
    _check_finite(geom)
    if geom.slant_distance <= 0:
        raise ValueError("path loss is undefined at zero distance")
    if channel == LOS:
        extra = params.epsilon_los
    elif channel == NLOS:
        extra = params.epsilon_nlos
    else:
        raise ValueError(f"unknown channel type {channel!r}")
    free_space = 4.0 * math.pi * params.fc_uplink * geom.slant_distance / params.light_speed
    return 20.0 * math.log10(free_space) + extra


def received_power(geom: LinkGeometry, channel: str, params: ChannelParams) -> float:
    """IoT transmit power divided by the linear path loss (watts)."""
    return params.tx_power_iot / db_to_linear(path_loss_db(geom, channel, params))


def _effective_power(geom: LinkGeometry, channel: str, params: ChannelParams) -> float:
    # received power scaled by (10^(zeta/10))^-1, zeta = probability of the drawn channel type
    p_los, p_nlos = los_probability(geom, params)
    zeta = p_los if channel == LOS else p_nlos
    return received_power(geom, channel, params) / 10.0 ** (zeta / 10.0)


def uplink_sinr(
    serving: LinkGeometry,
    interferers: Iterable[LinkGeometry] = (),
    params: ChannelParams = ChannelParams(),
    *,
    serving_channel: str = LOS,
    interferer_channels: Sequence[str] | None = None,
) -> float:
    """Linear SINR of one device at the serving UAV.

    ``interferers`` are links from devices served by other UAVs to this UAV;
    ``interferer_channels`` gives their drawn channel types (LoS if omitted).
    """
    interferers = list(interferers)
    if interferer_channels is None:
        interferer_channels = [LOS] * len(interferers)
    if len(interferer_channels) != len(interferers):
        raise ValueError("one channel type per interferer is required")
    interference = sum(_effective_power(g, c, params) for g, c in zip(interferers, interferer_channels))
    sinr = _effective_power(serving, serving_channel, params) / (interference + params.noise_power)
    if not math.isfinite(sinr):
        raise ValueError("non-finite SINR")
    return sinr


def uplink_sinr_from_power(signal: float, interference: float, params: ChannelParams) -> float:
    """SINR when the effective (zeta-scaled) powers are already known."""
    return signal / (interference + params.noise_power)


def uplink_rate(sinr: float, device_count: int, params: ChannelParams) -> float:
    """Per-device uplink capacity in bits/s; zero at or below the SINR threshold."""
    if device_count < 1:
        raise ValueError("device_count must be >= 1")
    if sinr <= params.sinr_threshold:
        return 0.0
    return params.bw_uplink / device_count * math.log2(1.0 + sinr)


def backhaul_received_power(geom: LinkGeometry, params: ChannelParams) -> float:
    _check_finite(geom)
    if geom.slant_distance <= 0:
        raise ValueError("backhaul power is undefined at zero distance")
    factor = params.light_speed / (4.0 * math.pi * geom.slant_distance * params.fc_mmwave)
    if params.squared_friis:
        factor = factor * factor
    return params.tx_power_uav * params.gain_tx * params.gain_rx * factor


def backhaul_rate(geom: LinkGeometry, params: ChannelParams) -> float:
    """mmWave backhaul capacity (bits/s); zero outside the backhaul range.

    The range gate uses the horizontal UAV-to-BS distance, the received power
    uses the slant distance.
    """
    power = backhaul_received_power(geom, params)
    if geom.horizontal_distance > params.backhaul_range:
        return 0.0
    snr = power / (params.bw_mmwave * params.noise_power)
    return params.bw_mmwave * math.log2(1.0 + snr)
