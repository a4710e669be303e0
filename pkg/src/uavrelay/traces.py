"""Record an episode as a self-describing log and re-run it to check for drift."""

from __future__ import annotations

import json
import math

from . import agent as ag
from .config import ScenarioConfig
from .env import make_env
from .nn import MlpQNetwork


def record_episode(config: ScenarioConfig, run_seed: int, episode_seed, kind: str,
                   net: MlpQNetwork | None = None, network_path: str | None = None
                   ) -> tuple[ag.EpisodeMetrics, dict, list[dict]]:
    env = make_env(config, run_seed, record_trace=True)
    if kind == "greedy":
        policy = ag.greedy_action
    else:
        if net is None:
            raise ValueError(f"agent {kind!r} needs a network")
        policy = ag.q_policy(net)
    metrics = ag.run_episode(env, policy, episode_seed)
    header = {"config": config.dumps(), "run_seed": int(run_seed),
              "episode_seed": [int(x) for x in episode_seed] if isinstance(episode_seed, (list, tuple))
              else episode_seed,
              "agent": kind, "network": network_path, "metrics": metrics.as_dict()}
    return metrics, header, env.trace


def replay_steps(header: dict, steps: list[dict]) -> list[dict]:
    """Apply the logged actions to a fresh environment and return its step records."""
    config = ScenarioConfig.loads(header["config"])
    env = make_env(config, header["run_seed"], record_trace=True)
    env.reset(header["episode_seed"])
    for rec in steps:
        _, _, done, _ = env.step(rec["action"])
        if done:
            break
    return env.trace


def diff_steps(logged: list[dict], rerun: list[dict], rel_tol: float = 0.0) -> list[str]:
    """Human-readable differences; empty when the runs agree exactly (or within ``rel_tol``)."""
    diffs = []
    if len(logged) != len(rerun):
        diffs.append(f"length: logged {len(logged)} steps, replay {len(rerun)}")
    for i, (a, b) in enumerate(zip(logged, rerun)):
        # compare in JSON form so both sides went through the same serialisation
        b = json.loads(json.dumps(b))
        for key in sorted(set(a) | set(b)):
            if key == "kind":
                continue
            va, vb = a.get(key), b.get(key)
            if not _same(va, vb, rel_tol):
                diffs.append(f"step {i} {key}: logged {va!r}, replay {vb!r}")
    return diffs


def _same(a, b, rel_tol: float) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        if a is None or b is None:
            return a is b
        return a == b or math.isclose(a, b, rel_tol=rel_tol, abs_tol=0.0)
    return a == b
