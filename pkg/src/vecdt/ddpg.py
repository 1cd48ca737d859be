"""DDPG for policy-map parameters: dense nets with hand-written backprop,
replay memory, decaying Gaussian exploration noise and the epoch cost."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels


class TrainingFault(FloatingPointError):
    """Non-finite loss or gradient during an update."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# --------------------------------------------------------------------------
# Networks
# --------------------------------------------------------------------------

_ACTIVATIONS = {
    "identity": (lambda z: z, lambda z, a: np.ones_like(z)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(z.dtype)),
    "sigmoid": (lambda z: 1.0 / (1.0 + np.exp(-z)), lambda z, a: a * (1.0 - a)),
    "softplus": (lambda z: np.logaddexp(0.0, z), lambda z, a: 1.0 / (1.0 + np.exp(-z))),
}


class FeedForwardNet:
    """Fully connected network. Parameters are ``[W0, b0, W1, b1, ...]``;
    ``W`` has shape (fan_in, fan_out) and inputs are row-major batches."""

    def __init__(self, sizes: Sequence[int], activations: Sequence[str],
                 rng: Optional[np.random.Generator] = None, final_scale: Optional[float] = None):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if len(activations) != len(sizes) - 1:
            raise ValueError("one activation per layer")
        for a in activations:
            if a not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        self.sizes = sizes
        self.activations = list(activations)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params: List[np.ndarray] = []
        n_layers = len(sizes) - 1
        for k in range(n_layers):
            fan_in, fan_out = sizes[k], sizes[k + 1]
            if k == n_layers - 1 and final_scale is not None:
                limit = final_scale
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def forward(self, x: np.ndarray, params=None):
        """Returns (output, cache) for a batch ``x`` of shape (N, in)."""
        params = self.params if params is None else params
        a = np.atleast_2d(np.asarray(x, dtype=np.float64))
        cache = [a]
        for k in range(self.n_layers):
            z = a @ params[2 * k] + params[2 * k + 1]
            a = _ACTIVATIONS[self.activations[k]][0](z)
            cache.append((z, a))
        return a, cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out: np.ndarray, params=None):
        """Gradients of sum(grad_out * output) w.r.t. parameters and input."""
        params = self.params if params is None else params
        grads = [None] * len(params)
        g = grad_out
        for k in reversed(range(self.n_layers)):
            z, a = cache[k + 1]
            g = g * _ACTIVATIONS[self.activations[k]][1](z, a)
            a_prev = cache[0] if k == 0 else cache[k][1]
            grads[2 * k] = a_prev.T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ params[2 * k].T
        return grads, g

    def copy(self) -> "FeedForwardNet":
        other = FeedForwardNet.__new__(FeedForwardNet)
        other.sizes = list(self.sizes)
        other.activations = list(self.activations)
        other.params = [p.copy() for p in self.params]
        return other

    def state_dict(self) -> dict:
        return {"sizes": list(self.sizes), "activations": list(self.activations),
                "params": [p.copy() for p in self.params]}

    @classmethod
    def from_state_dict(cls, state: dict) -> "FeedForwardNet":
        net = cls.__new__(cls)
        net.sizes = list(state["sizes"])
        net.activations = list(state["activations"])
        net.params = [np.array(p, dtype=np.float64) for p in state["params"]]
        for k in range(net.n_layers):
            if net.params[2 * k].shape != (net.sizes[k], net.sizes[k + 1]):
                raise ValueError("parameter shapes do not match layer sizes")
        return net


def soft_update(target: Sequence[np.ndarray], source: Sequence[np.ndarray], tau: float) -> List[np.ndarray]:
    """``target <- tau * target + (1 - tau) * source``, written as
    ``source + tau * (target - source)`` so fixed points stay exact."""
    if not 0.0 <= tau < 1.0:
        raise ValueError("soft-update coefficient must be in [0, 1)")
    if len(target) != len(source):
        raise ValueError("parameter lists differ in length")
    out = []
    for t, s in zip(target, source):
        if t.shape != s.shape:
            raise ValueError(f"shape mismatch {t.shape} vs {s.shape}")
        out.append(s + tau * (t - s))
    return out


# --------------------------------------------------------------------------
# Losses and updates
# --------------------------------------------------------------------------


def critic_targets(costs, next_states, actor_target: FeedForwardNet,
                   critic_target: FeedForwardNet, discount: float) -> np.ndarray:
    next_actions = actor_target(next_states)
    q_next = critic_target(np.hstack([next_states, next_actions]))[:, 0]
    return np.asarray(costs, dtype=np.float64) + discount * q_next


def critic_loss_and_grad(critic: FeedForwardNet, states, actions, targets, params=None):
    q, cache = critic.forward(np.hstack([states, actions]), params)
    err = q[:, 0] - targets
    loss = float(np.mean(err * err))
    grad_q = (2.0 / len(targets)) * err[:, None]
    grads, _ = critic.backward(cache, grad_q, params)
    return loss, grads


def critic_update(critic: FeedForwardNet, states, actions, targets, lr: float):
    """One gradient step on the mean squared Bellman error; returns the pre-step loss."""
    loss, grads = critic_loss_and_grad(critic, states, actions, targets)
    _check_finite("critic", loss, grads, states=states, targets=targets)
    critic.params = [p - lr * g for p, g in zip(critic.params, grads)]
    return loss


def actor_objective_and_grad(actor: FeedForwardNet, critic: FeedForwardNet, states, params=None):
    """Mean critic value of the actor's actions and its gradient w.r.t. actor params."""
    actions, a_cache = actor.forward(states, params)
    n_state = states.shape[1]
    q, c_cache = critic.forward(np.hstack([states, actions]))
    n = states.shape[0]
    _, grad_in = critic.backward(c_cache, np.full((n, 1), 1.0 / n))
    grad_a = grad_in[:, n_state:]
    grads, _ = actor.backward(a_cache, grad_a, params)
    return float(q.mean()), grads


def actor_update(actor: FeedForwardNet, critic: FeedForwardNet, states, lr: float):
    """Descend the mean critic value (the critic estimates cost)."""
    obj, grads = actor_objective_and_grad(actor, critic, states)
    _check_finite("actor", obj, grads, states=states)
    if lr != 0.0:
        actor.params = [p - lr * g for p, g in zip(actor.params, grads)]
    return obj


def _check_finite(which, value, grads, **arrays):
    if np.isfinite(value) and all(np.all(np.isfinite(g)) for g in grads):
        return
    diag = {f"{k}_absmax": float(np.nanmax(np.abs(v))) for k, v in arrays.items()}
    diag["value"] = float(value)
    diag["grad_norms"] = [float(np.linalg.norm(g)) for g in grads]
    raise TrainingFault(f"non-finite {which} loss or gradient", diag)


# --------------------------------------------------------------------------
# Replay memory and noise
# --------------------------------------------------------------------------


class ReplayMemory:
    """Ring buffer of (state, action, cost, next_state)."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.costs = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.cursor = 0
        self.size = 0

    def push(self, s, a, c, s_next) -> None:
        i = self.cursor
        self.states[i] = s
        self.actions[i] = a
        self.costs[i] = c
        self.next_states[i] = s_next
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator):
        if self.size == 0:
            raise ValueError("cannot sample from an empty memory")
        idx = rng.choice(self.size, size=min(n, self.size), replace=False)
        return self.states[idx], self.actions[idx], self.costs[idx], self.next_states[idx]

    def __len__(self):
        return self.size


class NoiseProcess:
    """Gaussian exploration noise whose mean and spread decay by ``decay`` per epoch."""

    def __init__(self, mean: float = 0.0, std: float = 0.2, decay: float = 0.995):
        if not 0.0 < decay < 1.0:
            raise ValueError("noise decay must be in (0, 1)")
        if std < 0:
            raise ValueError("noise spread must be >= 0")
        self.mean0 = mean
        self.std0 = std
        self.decay = decay
        self.epoch = 1

    @property
    def mean(self) -> float:
        return self.mean0 * self.decay ** (self.epoch - 1)

    @property
    def std(self) -> float:
        return self.std0 * self.decay ** (self.epoch - 1)

    def sample(self, dim: int, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self.std * rng.standard_normal(dim)

    def step(self) -> None:
        self.epoch += 1


# --------------------------------------------------------------------------
# Epoch cost
# --------------------------------------------------------------------------


def epoch_cost(slot_offsets, violations, slots_per_epoch: int) -> float:
    """Mean over the epoch's slots of the per-slot mean weighted violation.

    ``slot_offsets[i]`` is the offload slot of task ``i`` relative to the
    epoch start; slots with no offloaded task contribute zero.
    """
    return kernels.slot_mean_cost(slot_offsets, violations, slots_per_epoch)


# --------------------------------------------------------------------------
# Agent
# --------------------------------------------------------------------------


@dataclass
class DDPGConfig:
    actor_hidden: Tuple[int, ...] = (128, 64)
    critic_hidden: Tuple[int, ...] = (128, 64)
    hidden_activation: str = "tanh"
    actor_lr: float = 3e-4
    critic_lr: float = 1e-2
    discount: float = 0.9
    soft_update: float = 0.99
    batch_size: int = 32
    memory_capacity: int = 10000
    warmup: int = 32
    updates_per_epoch: int = 5
    noise_mean: float = 0.0
    noise_std: float = 0.2
    noise_decay: float = 0.998
    final_init: float = 3e-3


class DDPGAgent:
    def __init__(self, state_dim: int, action_dim: int, config: DDPGConfig,
                 rng: np.random.Generator, noise_rng: np.random.Generator):
        self.config = config
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.rng = rng
        self.noise_rng = noise_rng
        h = config.hidden_activation
        actor_sizes = [state_dim, *config.actor_hidden, action_dim]
        critic_sizes = [state_dim + action_dim, *config.critic_hidden, 1]
        self.actor = FeedForwardNet(actor_sizes, [h] * len(config.actor_hidden) + ["tanh"], rng,
                                    final_scale=config.final_init)
        self.critic = FeedForwardNet(critic_sizes, [h] * len(config.critic_hidden) + ["identity"], rng,
                                     final_scale=config.final_init)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.memory = ReplayMemory(config.memory_capacity, state_dim, action_dim)
        self.noise = NoiseProcess(config.noise_mean, config.noise_std, config.noise_decay)
        self.updates = 0
        self.last_critic_loss = float("nan")

    def set_output_bias(self, action) -> None:
        """Shift the actor (and its target) so a zero pre-activation maps to ``action``."""
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (self.action_dim,) or np.any(np.abs(action) >= 1.0):
            raise ValueError("bias action must have the action shape and lie in (-1, 1)")
        for net in (self.actor, self.actor_target):
            net.params[-1] = np.arctanh(action)

    def act(self, state, explore: bool = True) -> np.ndarray:
        state = np.asarray(state, dtype=np.float64)
        if state.shape != (self.state_dim,):
            raise ValueError(f"state has shape {state.shape}, actor expects ({self.state_dim},)")
        a = self.actor(state[None, :])[0]
        if explore:
            a = a + self.noise.sample(self.action_dim, self.noise_rng)
        return np.clip(a, -1.0, 1.0)

    def remember(self, s, a, c, s_next) -> None:
        self.memory.push(s, a, c, s_next)

    def learn(self) -> Optional[float]:
        """Run the configured number of updates if the memory is warm."""
        cfg = self.config
        if len(self.memory) < max(cfg.warmup, 1):
            return None
        loss = None
        for _ in range(cfg.updates_per_epoch):
            s, a, c, s2 = self.memory.sample(cfg.batch_size, self.rng)
            y = critic_targets(c, s2, self.actor_target, self.critic_target, cfg.discount)
            actor_update(self.actor, self.critic, s, cfg.actor_lr)
            loss = critic_update(self.critic, s, a, y, cfg.critic_lr)
            self.actor_target.params = soft_update(self.actor_target.params, self.actor.params, cfg.soft_update)
            self.critic_target.params = soft_update(self.critic_target.params, self.critic.params, cfg.soft_update)
            self.updates += 1
        self.last_critic_loss = loss
        return loss

    def end_epoch(self) -> None:
        self.noise.step()
