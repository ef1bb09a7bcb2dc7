"""Plain DQN: numpy MLP with manual backprop, replay buffer, target network."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np


class TrainingDivergence(FloatingPointError):
    pass


class Transition(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray


def stack_transitions(transitions: Sequence[Transition]) -> Batch:
    if len(transitions) == 0:
        raise ValueError("batch must be non-empty")
    return Batch(
        np.array([t.state for t in transitions], dtype=np.float64),
        np.array([t.action for t in transitions], dtype=np.int64),
        np.array([t.reward for t in transitions], dtype=np.float64),
        np.array([t.next_state for t in transitions], dtype=np.float64),
        np.array([t.terminal for t in transitions], dtype=bool),
    )


class QNetwork:
    """MLP with ReLU hidden layers and a linear output (one Q-value per action).

    Weights are stored as ``(fan_in, fan_out)`` matrices so that a batch of
    row vectors maps as ``x @ W + b``.
    """

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator | None = None):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def n_actions(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def copy(self) -> "QNetwork":
        clone = QNetwork.__new__(QNetwork)
        clone.sizes = self.sizes
        clone.weights = [W.copy() for W in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def load_from(self, other: "QNetwork") -> None:
        if other.sizes != self.sizes:
            raise ValueError(f"shape mismatch {other.sizes} vs {self.sizes}")
        for dst, src in zip(self.parameters(), other.parameters()):
            dst[...] = src

    def _check(self, x: np.ndarray) -> None:
        if x.shape[-1] != self.sizes[0]:
            raise ValueError(f"state has {x.shape[-1]} values, network expects {self.sizes[0]}")

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        self._check(x)
        h = x
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if k < last:
                h = np.maximum(h, 0.0)
        return h

    __call__ = forward

    def forward_cache(self, X: np.ndarray):
        """Batch forward pass that keeps the layer inputs for :meth:`backward`."""
        self._check(X)
        inputs = [X]
        h = X
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if k < last:
                h = np.maximum(h, 0.0)
                inputs.append(h)
        return h, inputs

    def backward(self, inputs, dout: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients given dL/d(output); same order as :meth:`parameters`."""
        grads = [None] * (2 * len(self.weights))
        delta = dout
        for k in range(len(self.weights) - 1, -1, -1):
            a = inputs[k]
            grads[2 * k] = a.T @ delta
            grads[2 * k + 1] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k].T) * (a > 0.0)
        return grads


def q_forward(net: QNetwork, state) -> np.ndarray:
    return net.forward(state)


def q_of_first_action(net: QNetwork, state) -> float | np.ndarray:
    q = net.forward(state)
    return q[..., 0]


def td_targets(target_net: QNetwork, batch: Batch, gamma: float) -> np.ndarray:
    next_q = target_net.forward(batch.next_states).max(axis=1)
    return batch.rewards + gamma * np.where(batch.terminals, 0.0, next_q)


def loss_and_grads(net: QNetwork, target_net: QNetwork, batch: Batch, gamma: float):
    """Mean squared TD error on the taken actions and its parameter gradients."""
    y = td_targets(target_net, batch, gamma)
    q, inputs = net.forward_cache(batch.states)
    rows = np.arange(len(y))
    err = q[rows, batch.actions] - y
    loss = float(np.mean(err * err))
    dq = np.zeros_like(q)
    dq[rows, batch.actions] = 2.0 * err / len(y)
    return loss, net.backward(inputs, dq)


def dqn_train_step(net: QNetwork, target_net: QNetwork, batch, gamma: float, lr: float,
                   grad_clip: float | None = 10.0) -> float:
    """One SGD step on the DQN loss (in place); returns the pre-update loss."""
    if not isinstance(batch, Batch):
        batch = stack_transitions(batch)
    loss, grads = loss_and_grads(net, target_net, batch, gamma)
    if not np.isfinite(loss):
        raise TrainingDivergence(f"non-finite DQN loss {loss}")
    scale = lr
    if grad_clip is not None:
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
        if norm > grad_clip:
            scale = lr * grad_clip / norm
    for p, g in zip(net.parameters(), grads):
        p -= scale * g
    return loss


def select_action(net: QNetwork, state, epsilon: float, rng: np.random.Generator) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(net.n_actions))
    return int(np.argmax(net.forward(state)))


def sync_target(net: QNetwork, target_net: QNetwork) -> QNetwork:
    target_net.load_from(net)
    return target_net


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest transition is overwritten first."""

    def __init__(self, capacity: int, state_size: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.states = np.zeros((capacity, state_size))
        self.next_states = np.zeros((capacity, state_size))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminals = np.zeros(capacity, dtype=bool)
        self.seq = np.full(capacity, -1, dtype=np.int64)
        self.cursor = 0
        self.size = 0
        self.pushed = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action, reward, next_state, terminal) -> None:
        i = self.cursor
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.terminals[i] = terminal
        self.seq[i] = self.pushed
        self.pushed += 1
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} transitions, need {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.terminals[idx])


@dataclass(frozen=True)
class DQNConfig:
    hidden: tuple = (64, 64)
    learning_rate: float = 1e-3
    gamma: float = 0.99
    batch_size: int = 64
    buffer_capacity: int = 50_000
    target_sync: int = 500
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_episodes: int = 200
    grad_clip: float = 10.0

    def action_epsilon(self, episode: int) -> float:
        """Linear decay from ``eps_start`` to ``eps_end`` over the first episodes."""
        if self.eps_decay_episodes <= 0:
            return self.eps_end
        frac = min(episode / self.eps_decay_episodes, 1.0)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


class DQNAgent:
    def __init__(self, state_size: int, n_actions: int, config: DQNConfig,
                 init_rng: np.random.Generator, act_rng: np.random.Generator,
                 replay_rng: np.random.Generator):
        self.config = config
        self.net = QNetwork((state_size, *config.hidden, n_actions), init_rng)
        self.target = self.net.copy()
        self.buffer = ReplayBuffer(config.buffer_capacity, state_size)
        self.act_rng = act_rng
        self.replay_rng = replay_rng
        self.train_steps = 0

    def act(self, state, epsilon: float) -> int:
        return select_action(self.net, state, epsilon, self.act_rng)

    def observe(self, state, action, reward, next_state, terminal) -> float | None:
        """Store a transition and, once the buffer holds a batch, learn from it."""
        self.buffer.push(state, action, reward, next_state, terminal)
        cfg = self.config
        if len(self.buffer) < cfg.batch_size:
            return None
        batch = self.buffer.sample(cfg.batch_size, self.replay_rng)
        loss = dqn_train_step(self.net, self.target, batch, cfg.gamma, cfg.learning_rate, cfg.grad_clip)
        self.train_steps += 1
        if self.train_steps % cfg.target_sync == 0:
            sync_target(self.net, self.target)
        return loss


CHECKPOINT_HEADER = "# drlcov-qnetwork v1"


def save_checkpoint(net: QNetwork, path) -> None:
    """Text dump: header, layer sizes, then one parameter per line (W row-major, then b)."""
    lines = [CHECKPOINT_HEADER, "layers " + " ".join(str(s) for s in net.sizes)]
    for p in net.parameters():
        lines.extend(repr(float(v)) for v in p.ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> QNetwork:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise ValueError(f"{path}: not a drlcov checkpoint")
    sizes = [int(s) for s in lines[1].split()[1:]]
    net = QNetwork(sizes)
    values = np.array([float(v) for v in lines[2:]])
    offset = 0
    for p in net.parameters():
        p[...] = values[offset : offset + p.size].reshape(p.shape)
        offset += p.size
    if offset != len(values):
        raise ValueError(f"{path}: expected {offset} parameters, found {len(values)}")
    return net
