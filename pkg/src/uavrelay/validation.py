"""Property suites behind ``uavrelay validate``.

Each suite returns a :class:`SuiteResult`; ``run_all`` runs them in order and
never stops at the first failure.
"""

from __future__ import annotations

import itertools
import time
import traceback
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import agent as ag
from . import channel as ch
from .config import ScenarioConfig
from .env import ConstraintFlags, InfeasibleActionError, make_env, reward_from_flags
from .nn import MlpQNetwork
from .traces import diff_steps, record_episode, replay_steps


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def small_config(**kw) -> ScenarioConfig:
    base = dict(n_waypoints=8, horizon=60, episodes=2, eval_episodes=2)
    base.update(kw)
    return ScenarioConfig().replace(**base)


def _random_policy(rng):
    def policy(env):
        return int(rng.choice(np.flatnonzero(env.action_mask()))), None
    return policy


def aoi_recurrence(seed: int = 0) -> tuple[bool, str]:
    """Every source age either grows by exactly one slot or drops on a delivery."""
    cfg = small_config()
    rng = np.random.default_rng([seed, 10])
    checked = 0
    for ep in range(3):
        env = make_env(cfg, seed, record_trace=True)
        ag.run_episode(env, _random_policy(rng), [seed, 9, ep])
        prev = {}
        for t, p, age in env.aoi_trace:
            before = prev.get(p, 0)
            if age != before + 1 and age > before:
                return False, f"episode {ep} slot {t} waypoint {p}: age {before} -> {age}"
            prev[p] = age
            checked += 1
    return True, f"{checked} (slot, waypoint) ages"


def los_complementarity(seed: int = 0) -> tuple[bool, str]:
    params = ch.ChannelParams()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(2000):
        geom = ch.LinkGeometry.from_offsets(rng.uniform(0, 2000), rng.uniform(1, 500))
        p_los, p_nlos = ch.los_probability(geom, params)
        if not (0.0 <= p_los <= 1.0 and 0.0 <= p_nlos <= 1.0):
            return False, f"probability out of range at {geom}"
        worst = max(worst, abs(p_los + p_nlos - 1.0))
    return worst <= 1e-12, f"max |p_los + p_nlos - 1| = {worst:.2e}"


def replay_fifo(seed: int = 0) -> tuple[bool, str]:
    cap, extra = 50, 17
    mem = ag.ReplayMemory(cap, 1, 2)
    for i in range(cap + extra):
        mem.push([float(i)], 0, float(i), [0.0], False)
    held = [int(mem.rewards[j]) for j in mem.order()]
    expected = list(range(extra, cap + extra))
    if len(mem) != cap or held != expected:
        return False, f"memory holds {held[:5]}... expected {expected[:5]}..."
    return True, f"capacity {cap}, {extra} evictions in order"


def uniform_sampling(seed: int = 0) -> tuple[bool, str]:
    cap, draws = 200, 100_000
    mem = ag.ReplayMemory(cap, 1, 2)
    for i in range(cap):
        mem.push([float(i)], 0, 0.0, [0.0], False)
    idx = mem.sample_indices(draws, np.random.default_rng([seed, 11]))
    counts = np.bincount(idx, minlength=cap)
    expected = draws / cap
    sigma = np.sqrt(draws * (1 / cap) * (1 - 1 / cap))
    z = np.abs(counts - expected).max() / sigma
    p = stats.chisquare(counts).pvalue
    return bool(z < 5 and p > 1e-4), f"max |z| = {z:.2f}, chi-square p = {p:.3f}"


def mask_respect(seed: int = 0) -> tuple[bool, str]:
    cfg = small_config()
    env = make_env(cfg, seed)
    rng = np.random.default_rng([seed, 12])
    net = MlpQNetwork((env.n_features, 16, env.n_actions), seed=seed)
    picks = 0
    for ep in range(3):
        env.reset([seed, 12, ep])
        done = False
        while not done:
            mask = env.action_mask()
            for eps in (0.0, 0.5, 1.0):
                a = ag.select_action(net, env.encode_state(), mask, eps, rng)
                if not mask[a]:
                    return False, f"masked action {a} chosen at eps={eps}"
                picks += 1
            infeasible = np.flatnonzero(~mask)
            if infeasible.size:
                try:
                    env.transition(env.state, int(infeasible[0]), env.draw_channels())
                    return False, "infeasible action accepted by the environment"
                except InfeasibleActionError:
                    pass
            _, _, done, _ = env.step(a)
    return True, f"{picks} selections"


def reward_case_table(seed: int = 0) -> tuple[bool, str]:
    alpha1, eta = 1.0, 0.42
    for combo in itertools.product((True, False), repeat=4):
        flags = ConstraintFlags(*combo)
        traj, cov, eff, fresh = combo
        if not (traj and cov and eff):
            want = -alpha1
        elif not fresh:
            want = 0.0
        else:
            want = alpha1 * eta
        got = reward_from_flags(flags, eta, alpha1)
        if got != want:
            return False, f"flags {combo}: reward {got}, expected {want}"
    return True, "16 flag combinations"


def partition_property(seed: int = 0) -> tuple[bool, str]:
    """On episodes that end with every constraint holding, trajectories meet only at b."""
    cfg = small_config(n_waypoints=6, horizon=120)
    rng = np.random.default_rng([seed, 13])
    accepting = 0
    for ep in range(6):
        env = make_env(cfg, seed)
        ag.run_episode(env, _random_policy(rng) if ep % 2 else ag.greedy_action, [seed, 13, ep])
        flags = env.constraint_flags(final=True)
        if not flags.coverage:
            continue
        accepting += 1
        v = env.state.visited.copy()
        v[:, env.graph.base] = False
        if np.any(v.sum(axis=0) > 1):
            return False, f"episode {ep}: overlapping trajectory sets"
        if not env.state.visited.any(axis=0).all():
            return False, f"episode {ep}: union of trajectories misses a waypoint"
    if accepting == 0:
        return False, "no accepting episode was produced"
    return True, f"{accepting} accepting episodes"


def seed_determinism(seed: int = 0) -> tuple[bool, str]:
    cfg = small_config()
    net = MlpQNetwork((2 * cfg.n_uavs + 4, 16, make_env(cfg, seed).n_actions), seed=seed)
    for kind, model in (("greedy", None), ("replay", net)):
        _, header, steps = record_episode(cfg, seed, [seed, 14, 0], kind, model)
        _, header2, steps2 = record_episode(cfg, seed, [seed, 14, 0], kind, model)
        diffs = diff_steps(steps, steps2) + diff_steps(steps, replay_steps(header, steps))
        if header["metrics"] != header2["metrics"] or diffs:
            return False, f"{kind}: {diffs[:3]}"
    return True, "two agents, rerun and replay agree exactly"


SUITES = {
    "aoi_recurrence": aoi_recurrence,
    "los_complementarity": los_complementarity,
    "replay_fifo": replay_fifo,
    "uniform_sampling": uniform_sampling,
    "mask_respect": mask_respect,
    "reward_case_table": reward_case_table,
    "partition_property": partition_property,
    "seed_determinism": seed_determinism,
}


def run_all(seed: int = 0, names=None) -> list[SuiteResult]:
    results = []
    for name in names or SUITES:
        start = time.perf_counter()
        try:
            ok, detail = SUITES[name](seed)
        except Exception as exc:
            ok, detail = False, "".join(traceback.format_exception_only(type(exc), exc)).strip()
        results.append(SuiteResult(name, bool(ok), detail, time.perf_counter() - start))
    return results
