"""Sweeps over waypoints, gamma and the AoI threshold; seed-averaged summaries."""

from __future__ import annotations

import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import agent as ag
from .config import ScenarioConfig
from .env import UavRelayEnv, make_env
from .nn import MlpQNetwork

log = logging.getLogger(__name__)

AGENTS = ("replay", "baseline", "greedy")
METRICS = ("reward", "eta", "aoi", "bandwidth_efficiency", "utilization")

# axis name -> (config field, default grid)
AXES = {
    "waypoints": ("n_waypoints", (6, 8, 10, 12, 14)),
    "gamma": ("gamma", (0.4, 0.5, 0.6, 0.7, 0.8, 0.9)),
    "aoi_threshold": ("aoi_threshold", (0.3, 0.5, 0.7, 0.9)),
}


class SweepError(ValueError):
    pass


@dataclass
class MetricsRecord:
    scenario_id: str
    axis: str
    value: float
    seed: int
    agent: str
    reward: float = math.nan
    eta: float = math.nan
    aoi: float = math.nan
    bandwidth_efficiency: float = math.nan
    utilization: float = math.nan
    episodes: int = 0
    status: str = "ok"
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def as_dict(self) -> dict:
        return asdict(self)


def validate_grid(axis: str, grid) -> tuple:
    if axis not in AXES:
        raise SweepError(f"unknown axis {axis!r}; choose from {sorted(AXES)}")
    field, default = AXES[axis]
    grid = tuple(default if grid is None else grid)
    if not grid:
        raise SweepError("empty grid")
    for v in grid:
        if axis == "waypoints" and (int(v) != v or not 6 <= v <= 14 or int(v) % 2):
            raise SweepError(f"waypoint counts must be even integers in [6, 14], got {v}")
        if axis == "gamma" and not any(math.isclose(v, g) for g in AXES["gamma"][1]):
            raise SweepError(f"gamma grid points must come from {AXES['gamma'][1]}, got {v}")
        if axis == "aoi_threshold" and not any(math.isclose(v, g) for g in AXES["aoi_threshold"][1]):
            raise SweepError(f"AoI thresholds must come from {AXES['aoi_threshold'][1]}, got {v}")
    return tuple(int(v) for v in grid) if axis == "waypoints" else tuple(float(v) for v in grid)


def point_config(config: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    return config.replace(**{AXES[axis][0]: value})


# -- single runs -------------------------------------------------------------------

def train_agent(config: ScenarioConfig, kind: str, seed: int) -> ag.TrainResult | None:
    if kind == "replay":
        return ag.train(config, make_env, seed)
    if kind == "baseline":
        return ag.baseline_dqn_train(config, make_env, seed)
    if kind == "greedy":
        return None
    raise SweepError(f"unknown agent kind {kind!r}")


def evaluate_agent(config: ScenarioConfig, kind: str, seed: int, net: MlpQNetwork | None,
                   env: UavRelayEnv | None = None) -> list[ag.EpisodeMetrics]:
    env = make_env(config, seed) if env is None else env
    seeds = ag.eval_seeds(seed, config.eval_episodes)
    if kind == "greedy":
        return ag.evaluate_greedy(env, seeds)
    return ag.evaluate(net, env, seeds)


def run_cell(config: ScenarioConfig, axis: str, value, seed: int, kind: str,
             out_dir: str | Path | None = None) -> MetricsRecord:
    """Train (for the learned agents), evaluate and summarise one (point, seed, agent) run."""
    record = MetricsRecord(scenario_id=config.digest(), axis=axis, value=value, seed=seed, agent=kind)
    try:
        result = train_agent(config, kind, seed)
        net = None if result is None else result.net
        episodes = evaluate_agent(config, kind, seed, net)
        for k, v in ag.summarize(episodes).items():
            if k in METRICS:
                setattr(record, k, v)
        record.episodes = len(episodes)
        if out_dir is not None:
            from .export import write_run_artifacts
            write_run_artifacts(out_dir, config, seed, kind, result, episodes)
    except Exception as exc:  # recorded, never dropped
        log.warning("run %s/%s=%s seed %d failed: %s", kind, axis, value, seed, exc)
        record.status = "failed"
        record.error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
    return record


def _run_cell_args(args) -> MetricsRecord:
    return run_cell(*args)


def run_experiment(config: ScenarioConfig, axis: str, grid=None, seeds=None, agents=AGENTS,
                   out_dir: str | Path | None = None, workers: int = 1) -> list[MetricsRecord]:
    """One record per grid point x agent x seed, in that nesting order."""
    grid = validate_grid(axis, grid)
    seeds = tuple(config.seeds if seeds is None else seeds)
    for kind in agents:
        if kind not in AGENTS:
            raise SweepError(f"unknown agent kind {kind!r}")
    jobs = [(point_config(config, axis, v), axis, v, int(s), kind, out_dir)
            for v in grid for kind in agents for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_cell_args, jobs))
    return [_run_cell_args(j) for j in jobs]


# -- aggregation ---------------------------------------------------------------------

@dataclass
class Cell:
    axis: str
    value: float
    agent: str
    n: int
    failed: int
    mean: dict
    std: dict
    normalized: dict

    @property
    def empty(self) -> bool:
        return self.n == 0

    def row(self) -> dict:
        out = {"axis": self.axis, "value": self.value, "agent": self.agent, "n": self.n,
               "failed": self.failed}
        for m in METRICS:
            out[f"{m}_mean"] = self.mean[m]
            out[f"{m}_std"] = self.std[m]
            out[f"{m}_norm"] = self.normalized[m]
        return out


@dataclass
class Summary:
    cells: list
    bounds: dict  # (axis, agent, metric) -> (min, max) of the cell means

    def cell(self, axis: str, value, agent: str) -> Cell:
        for c in self.cells:
            if c.axis == axis and c.agent == agent and math.isclose(c.value, value):
                return c
        raise KeyError((axis, value, agent))

    def empty_cells(self) -> list:
        return [c for c in self.cells if c.empty]

    def table(self, axis: str, agent: str) -> list[dict]:
        return [c.row() for c in self.cells if c.axis == axis and c.agent == agent]

    def series(self, axis: str, agent: str, metric: str) -> list[tuple]:
        """Figure dataset: (axis value, mean, stddev) per grid point."""
        return [(c.value, c.mean[metric], c.std[metric])
                for c in self.cells if c.axis == axis and c.agent == agent]

    def groups(self) -> list[tuple]:
        seen = []
        for c in self.cells:
            if (c.axis, c.agent) not in seen:
                seen.append((c.axis, c.agent))
        return seen


def minmax(values) -> np.ndarray:
    """Map to [0, 1]; a constant (or single) series maps to all ones."""
    v = np.asarray(values, dtype=float)
    finite = v[np.isfinite(v)]
    if finite.size == 0:
        return np.full_like(v, np.nan)
    lo, hi = finite.min(), finite.max()
    if hi == lo:
        return np.where(np.isfinite(v), 1.0, np.nan)
    return (v - lo) / (hi - lo)


def aggregate(records: list[MetricsRecord]) -> Summary:
    """Per-cell mean and population stddev over seeds, then per-(axis, agent) min-max columns.

    Failed runs are counted in ``failed`` and excluded from the statistics; a
    cell with no successful run is kept with NaN statistics and ``n == 0``.
    """
    if not records:
        raise ValueError("no records to aggregate")
    keys = []
    for r in records:
        k = (r.axis, float(r.value), r.agent)
        if k not in keys:
            keys.append(k)
    cells = []
    for axis, value, kind in keys:
        rs = [r for r in records if (r.axis, float(r.value), r.agent) == (axis, value, kind)]
        good = [r for r in rs if r.ok]
        mean, std = {}, {}
        for m in METRICS:
            vals = np.array([getattr(r, m) for r in good], dtype=float)
            mean[m] = float(vals.mean()) if vals.size else math.nan
            std[m] = float(vals.std()) if vals.size else math.nan
        cells.append(Cell(axis, value, kind, len(good), len(rs) - len(good), mean, std, {}))
    bounds = {}
    groups = []
    for c in cells:
        if (c.axis, c.agent) not in groups:
            groups.append((c.axis, c.agent))
    for axis, kind in groups:
        members = [c for c in cells if c.axis == axis and c.agent == kind]
        for m in METRICS:
            means = [c.mean[m] for c in members]
            for c, v in zip(members, minmax(means)):
                c.normalized[m] = float(v)
            finite = [v for v in means if math.isfinite(v)]
            bounds[(axis, kind, m)] = (min(finite), max(finite)) if finite else (math.nan, math.nan)
    for c in cells:
        if c.empty:
            log.warning("empty cell: %s=%s agent %s", c.axis, c.value, c.agent)
    return Summary(cells=cells, bounds=bounds)
