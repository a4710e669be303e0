"""UAV relay navigation: channel/energy/AoI models, environment, DQN agents and sweeps."""

from .config import ScenarioConfig
from .env import UavRelayEnv, WaypointGraph, make_env

__all__ = ["ScenarioConfig", "UavRelayEnv", "WaypointGraph", "make_env"]
__version__ = "0.1.0"
