"""Replay memory, epsilon-greedy control, DQN training/evaluation and baselines.

The training and evaluation loops only rely on this environment surface:
``reset(seed)``, ``step(a)``, ``action_mask()``, ``encode_state()``,
``n_actions`` and ``n_features``. ``UavRelayEnv`` provides it, and so can a
toy MDP in tests.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .config import ScenarioConfig
from .env import UavRelayEnv, episode_seed
from .nn import DivergenceError, MlpQNetwork, sync_target, td_targets

log = logging.getLogger(__name__)

TRAIN_STREAM = 1
EVAL_STREAM = 2


class ReplayMemory:
    """Bounded FIFO of transitions, sampled uniformly with replacement."""

    def __init__(self, capacity: int, n_features: int, n_actions: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.features = np.zeros((capacity, n_features))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_features = np.zeros((capacity, n_features))
        self.dones = np.zeros(capacity, dtype=bool)
        self.next_masks = np.ones((capacity, n_actions), dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, features, action: int, reward: float, next_features, done: bool,
             next_mask: np.ndarray | None = None) -> None:
        i = self._next
        self.features[i] = features
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_features[i] = next_features
        self.dones[i] = done
        self.next_masks[i] = True if next_mask is None else next_mask
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def order(self) -> np.ndarray:
        """Slot indices from oldest to newest."""
        start = self._next if self._size == self.capacity else 0
        return (start + np.arange(self._size)) % self.capacity

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self._size == 0:
            raise ValueError("cannot sample from an empty memory")
        return rng.integers(0, self._size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> tuple:
        idx = self.sample_indices(batch_size, rng)
        return (self.features[idx], self.actions[idx], self.rewards[idx], self.next_features[idx],
                self.dones[idx], self.next_masks[idx])


@dataclass(frozen=True)
class ExplorationSchedule:
    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 10_000

    def __post_init__(self) -> None:
        if not 0.0 <= self.end <= self.start <= 1.0:
            raise ValueError("need 0 <= end <= start <= 1")

    def value(self, step: int) -> float:
        if self.decay_steps <= 0 or step >= self.decay_steps:
            return self.end
        return self.start + (self.end - self.start) * step / self.decay_steps


def select_action(net: MlpQNetwork, features: np.ndarray, mask: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy over feasible actions; exploitation ties go to the lowest index."""
    feasible = np.flatnonzero(mask)
    if feasible.size == 0:
        raise ValueError("no feasible action")
    if epsilon > 0 and rng.random() < epsilon:
        return int(feasible[rng.integers(feasible.size)])
    q = net.forward(features)
    return int(np.argmax(np.where(mask, q, -np.inf)))


# -- episodes ------------------------------------------------------------------

@dataclass
class EpisodeMetrics:
    reward: float
    eta: float
    aoi: float
    bandwidth_efficiency: float
    utilization: float
    steps: int
    violations: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _collect(env: UavRelayEnv, rewards: float, steps: int, served: int, violations: dict) -> EpisodeMetrics:
    cfg = env.config
    s = env.state
    uplink_bits = float(s.uplink_bits.sum())
    return EpisodeMetrics(
        reward=rewards, eta=s.eta, aoi=s.aoi_norm,
        bandwidth_efficiency=uplink_bits / (cfg.bw_uplink_hz * cfg.slot_duration * steps),
        utilization=served / (cfg.n_devices * steps),
        steps=steps, violations=violations,
    )


def run_episode(env: UavRelayEnv, policy: Callable, seed) -> EpisodeMetrics:
    """Roll out ``policy(env) -> (action, draws or None)`` for one episode."""
    env.reset(seed)
    total = 0.0
    steps = 0
    served = 0
    violations = {"trajectory": 0, "coverage": 0, "efficiency": 0, "freshness": 0}
    done = False
    while not done:
        action, draws = policy(env)
        if draws is None:
            _, reward, done, info = env.step(action)
        else:
            _, reward, done, info = env.apply(action, draws)
        total += reward
        steps += 1
        served += int(info.served_devices.sum())
        for name, ok in info.flags.as_dict().items():
            violations[name] += not ok
    return _collect(env, total, steps, served, violations)


def q_policy(net: MlpQNetwork) -> Callable:
    def policy(env):
        q = net.forward(env.encode_state())
        return int(np.argmax(np.where(env.action_mask(), q, -np.inf))), None
    return policy


def greedy_action(env: UavRelayEnv) -> tuple[int, np.ndarray]:
    """Best one-slot reward over feasible joint actions, evaluated on copies of the state.

    Channel draws for the slot are taken once and shared by every candidate
    and by the real step, so the lookahead sees the slot's actual outcome.
    """
    draws = env.draw_channels()
    best_action, best_reward = -1, -np.inf
    state = env.state
    for a in np.flatnonzero(env.action_mask(state)):
        _, info = env.transition(state, int(a), draws, check=False)
        if info.reward > best_reward:
            best_action, best_reward = int(a), info.reward
    return best_action, draws


def greedy_baseline(env: UavRelayEnv, horizon: int | None = None, seed=None) -> list[dict]:
    """Run one greedy episode and return its step trace."""
    cfg = env.config if horizon is None else env.config.replace(horizon=horizon)
    runner = UavRelayEnv(cfg, env.graph, record_trace=True)
    run_episode(runner, greedy_action, seed)
    return runner.trace


# -- training --------------------------------------------------------------------

@dataclass
class TrainResult:
    net: MlpQNetwork
    log: list
    replay: bool
    gradient_steps: int
    env_steps: int

    def manifest_fields(self, config: ScenarioConfig) -> dict:
        return {
            "replay": self.replay,
            "memory_capacity": config.memory_capacity if self.replay else 0,
            "batch_size": config.batch_size if self.replay else 1,
            "gradient_steps": self.gradient_steps,
            "env_steps": self.env_steps,
        }


def train(config: ScenarioConfig, env_factory: Callable, seed: int, replay: bool = True,
          episodes: int | None = None) -> TrainResult:
    """Deep Q-learning with a target network; ``replay=False`` gives the no-replay baseline.

    The no-replay variant takes one singleton gradient step on each transition
    as it happens and never revisits it.
    """
    env = env_factory(config, seed)
    episodes = config.episodes if episodes is None else episodes
    sizes = (env.n_features, *config.hidden_sizes, env.n_actions)
    net = MlpQNetwork(sizes, config.learning_rate, seed=[seed, 3])
    target = net.copy()
    rng = np.random.default_rng([seed, 4])
    # minibatch sampling has its own stream so exploration is identical with and without replay
    sample_rng = np.random.default_rng([seed, 5])
    memory = ReplayMemory(config.memory_capacity, env.n_features, env.n_actions) if replay else None
    schedule = ExplorationSchedule(config.eps_start, config.eps_end,
                                   int(config.eps_decay_fraction * episodes * config.horizon))
    env_steps = 0
    grad_steps = 0
    rows = []
    for episode in range(episodes):
        env.reset(episode_seed(seed, TRAIN_STREAM, episode))
        x = env.encode_state()
        mask = env.action_mask()
        ret, losses, steps = 0.0, [], 0
        violations = {"trajectory": 0, "coverage": 0, "efficiency": 0, "freshness": 0}
        done = False
        while not done:
            eps = schedule.value(env_steps)
            a = select_action(net, x, mask, eps, rng)
            _, r, done, info = env.step(a)
            x2 = env.encode_state()
            mask2 = env.action_mask()
            if replay:
                memory.push(x, a, r, x2, done, mask2)
                batch = memory.sample(config.batch_size, sample_rng) if len(memory) >= config.batch_size else None
            else:
                batch = (x[None, :], np.array([a]), np.array([r]), x2[None, :], np.array([done]), mask2[None, :])
            if batch is not None:
                bx, ba, br, bx2, bd, bm = batch
                y = td_targets(br, bx2, bd, target, config.gamma, bm)
                try:
                    losses.append(net.sgd_step(bx, ba, y))
                except DivergenceError as exc:
                    exc.diagnostics.update(episode=episode, step=steps, features=bx.tolist())
                    log.error("training diverged: %s", exc.diagnostics)
                    raise
                grad_steps += 1
                if grad_steps % config.target_sync == 0:
                    sync_target(net, target)
            ret += r
            steps += 1
            env_steps += 1
            for name, ok in _flags_of(info).items():
                violations[name] += not ok
            x, mask = x2, mask2
        state = getattr(env, "state", None)
        rows.append({
            "episode": episode, "return": ret, "steps": steps,
            "eta": float(getattr(state, "eta", 0.0)), "aoi": float(getattr(state, "aoi_norm", 0.0)),
            **{f"violations_{k}": v for k, v in violations.items()},
            "epsilon": eps, "loss": float(np.mean(losses)) if losses else float("nan"),
        })
    return TrainResult(net=net, log=rows, replay=replay, gradient_steps=grad_steps, env_steps=env_steps)


def baseline_dqn_train(config: ScenarioConfig, env_factory: Callable, seed: int,
                       episodes: int | None = None) -> TrainResult:
    return train(config, env_factory, seed, replay=False, episodes=episodes)


def _flags_of(info) -> dict:
    flags = getattr(info, "flags", None)
    return flags.as_dict() if flags is not None else {}


def evaluate(net: MlpQNetwork, env: UavRelayEnv, seeds) -> list[EpisodeMetrics]:
    """Greedy (epsilon = 0) rollouts of a trained network, one per seed."""
    if net.n_inputs != env.n_features or net.n_outputs != env.n_actions:
        raise ValueError(f"network {net.sizes} does not fit a scenario with "
                         f"{env.n_features} features and {env.n_actions} actions")
    policy = q_policy(net)
    return [run_episode(env, policy, s) for s in seeds]


def evaluate_greedy(env: UavRelayEnv, seeds) -> list[EpisodeMetrics]:
    return [run_episode(env, greedy_action, s) for s in seeds]


def eval_seeds(run_seed: int, n: int) -> list:
    return [episode_seed(run_seed, EVAL_STREAM, k) for k in range(n)]


def summarize(episodes: list[EpisodeMetrics]) -> dict:
    keys = ("reward", "eta", "aoi", "bandwidth_efficiency", "utilization", "steps")
    return {k: float(np.mean([getattr(m, k) for m in episodes])) for k in keys}
