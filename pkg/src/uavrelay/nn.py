"""Dense ReLU Q-network in numpy: forward, squared TD loss, backprop, SGD."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

FORMAT_NAME = "uavrelay-mlp"
FORMAT_VERSION = 1


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss or parameter."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class MlpQNetwork:
    """``sizes = (n_in, h1, ..., n_out)``; ReLU on hidden layers, identity output.

    Weights are stored as (fan_in, fan_out) so a batch ``x`` of shape (B, n_in)
    maps through ``x @ W + b``.
    """

    def __init__(self, sizes: Sequence[int], learning_rate: float = 1e-3, seed=None):
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output size")
        self.sizes = tuple(int(s) for s in sizes)
        self.learning_rate = float(learning_rate)
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def n_inputs(self) -> int:
        return self.sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "MlpQNetwork":
        new = MlpQNetwork.__new__(MlpQNetwork)
        new.sizes = self.sizes
        new.learning_rate = self.learning_rate
        new.weights = [w.copy() for w in self.weights]
        new.biases = [b.copy() for b in self.biases]
        return new

    def forward(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        single = x.ndim == 1
        if x.shape[-1] != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} features, got {x.shape[-1]}")
        a = x[None, :] if single else x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if k < last:
                a = np.maximum(a, 0.0)
        return a[0] if single else a

    __call__ = forward

    def _forward_cache(self, x: np.ndarray) -> list[np.ndarray]:
        acts = [x]
        last = len(self.weights) - 1
        a = x
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if k < last:
                a = np.maximum(a, 0.0)
            acts.append(a)
        return acts

    def loss_and_gradients(self, features: np.ndarray, actions: np.ndarray,
                           targets: np.ndarray) -> tuple[float, list[np.ndarray]]:
        """Mean squared TD error over the batch and its gradient w.r.t. every parameter.

        Only the output head of the taken action receives error signal.
        Gradients come back in :meth:`parameters` order.
        """
        x = np.atleast_2d(np.asarray(features, dtype=float))
        actions = np.asarray(actions, dtype=np.int64).reshape(-1)
        targets = np.asarray(targets, dtype=float).reshape(-1)
        n = x.shape[0]
        if n == 0:
            raise ValueError("empty minibatch")
        if not (len(actions) == len(targets) == n):
            raise ValueError("features, actions and targets must have the same length")
        acts = self._forward_cache(x)
        q = acts[-1]
        rows = np.arange(n)
        err = targets - q[rows, actions]
        loss = float(np.mean(err ** 2))
        delta = np.zeros_like(q)
        delta[rows, actions] = -2.0 * err / n
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        for k in range(len(self.weights) - 1, -1, -1):
            grads_w[k] = acts[k].T @ delta
            grads_b[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k].T) * (acts[k] > 0)
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.extend((gw, gb))
        return loss, grads

    def sgd_step(self, features: np.ndarray, actions: np.ndarray, targets: np.ndarray) -> float:
        """One plain SGD update on the squared TD loss; returns the pre-update loss."""
        loss, grads = self.loss_and_gradients(features, actions, targets)
        if not np.isfinite(loss):
            raise DivergenceError("non-finite loss", {
                "loss": loss, "actions": np.asarray(actions).tolist(),
                "targets": np.asarray(targets).tolist(),
            })
        lr = self.learning_rate
        if lr:
            for p, g in zip(self.parameters(), grads):
                p -= lr * g
            if not all(np.all(np.isfinite(p)) for p in self.parameters()):
                raise DivergenceError("non-finite parameters after update", {"loss": loss})
        return loss

    def load_state(self, other: "MlpQNetwork") -> None:
        if other.sizes != self.sizes:
            raise ValueError(f"shape mismatch: {other.sizes} vs {self.sizes}")
        for dst, src in zip(self.parameters(), other.parameters()):
            dst[...] = src

    # persistence -------------------------------------------------------------
    def save(self, path: str | Path) -> None:
        """Header line (JSON: format, version, layer shapes) then float64 little-endian values."""
        header = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "sizes": list(self.sizes),
                  "learning_rate": self.learning_rate,
                  "shapes": [list(p.shape) for p in self.parameters()]}
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n")
            for p in self.parameters():
                fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "MlpQNetwork":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
            blob = fh.read()
        if header.get("format") != FORMAT_NAME:
            raise ValueError(f"{path} is not a {FORMAT_NAME} file")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported network file version {header.get('version')}")
        net = cls(header["sizes"], header.get("learning_rate", 1e-3), seed=0)
        values = np.frombuffer(blob, dtype="<f8")
        offset = 0
        for p, shape in zip(net.parameters(), header["shapes"]):
            if list(p.shape) != shape:
                raise ValueError("layer shape header disagrees with sizes")
            size = p.size
            p[...] = values[offset:offset + size].reshape(shape)
            offset += size
        if offset != values.size:
            raise ValueError("trailing or missing parameter data")
        return net


def td_target(reward: float, next_features: np.ndarray, done: bool, target_net: MlpQNetwork,
              gamma: float, next_mask: np.ndarray | None = None) -> float:
    """``R`` if terminal, else ``R + gamma * max_a' Q_target(s', a')`` over feasible ``a'``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    if done:
        return float(reward)
    q = target_net.forward(next_features)
    if next_mask is not None:
        q = np.where(next_mask, q, -np.inf)
    return float(reward + gamma * np.max(q))


def td_targets(rewards: np.ndarray, next_features: np.ndarray, dones: np.ndarray,
               target_net: MlpQNetwork, gamma: float, next_masks: np.ndarray | None = None) -> np.ndarray:
    """Batched :func:`td_target`."""
    q = target_net.forward(np.atleast_2d(next_features))
    if next_masks is not None:
        q = np.where(next_masks, q, -np.inf)
    best = q.max(axis=1)
    return np.where(dones, rewards, rewards + gamma * np.where(dones, 0.0, best))


def sync_target(net: MlpQNetwork, target_net: MlpQNetwork) -> MlpQNetwork:
    target_net.load_state(net)
    return target_net
