"""Deterministic-policy-gradient agent: actor, critic, soft-updated targets,
uniform replay memory, and the per-step learning rule.

The critic takes the action concatenated onto the state at its input layer.
Both networks are small pyramids (hidden widths decreasing), the smallest
shape that learns the energy-management task at desk scale; widths are
configurable for sensitivity runs.

Per learn step: sample a uniform mini-batch, regress the critic on
y = r + gamma * (1 - done) * Q'(s', mu'(s')), ascend the actor along the
critic's action gradient, then soft-update both targets by tau.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import explore
from .env import CycleEnv, normalize_state
from .net import (
    AdamState,
    LayerSpec,
    Mlp,
    adam_step,
    backward_trace,
    forward,
    forward_trace,
    init_network,
)

STATE_DIM = 3
ACTION_DIM = 1

DEFAULT_HIDDEN = (64, 32)


def actor_specs(hidden: Sequence[int] = DEFAULT_HIDDEN, state_dim: int = STATE_DIM):
    """Pyramid actor: state -> hidden (relu) -> 1 (tanh, matching u in [-1, 1])."""
    dims = [state_dim, *hidden]
    layers = [LayerSpec(dims[k], dims[k + 1], "relu") for k in range(len(dims) - 1)]
    layers.append(LayerSpec(dims[-1], ACTION_DIM, "tanh"))
    return tuple(layers)


def critic_specs(hidden: Sequence[int] = DEFAULT_HIDDEN, state_dim: int = STATE_DIM):
    """Pyramid critic: (state, action) -> hidden (relu) -> 1 (linear)."""
    dims = [state_dim + ACTION_DIM, *hidden]
    layers = [LayerSpec(dims[k], dims[k + 1], "relu") for k in range(len(dims) - 1)]
    layers.append(LayerSpec(dims[-1], 1, "linear"))
    return tuple(layers)


@dataclass(frozen=True)
class Hyperparams:
    episodes: int = 1000  # K
    memory: int = 50_000  # replay capacity M
    lr_actor: float = 0.001
    lr_critic: float = 0.01
    gamma: float = 0.9
    tau: float = 0.01
    batch: int = 64
    # Schedule knobs the reference tables leave open:
    warmup: int | None = None  # transitions before learning starts (None -> batch)
    learn_every: int = 1  # environment steps per learn step
    grad_clip: float | None = None  # global-norm clip, None = off

    @classmethod
    def source(cls, **kw) -> "Hyperparams":
        """Source-domain defaults (K=1000, lr 0.001/0.01)."""
        return cls(**kw)

    @classmethod
    def target(cls, **kw) -> "Hyperparams":
        """Target-domain defaults (K=300, lr 0.0009/0.009)."""
        base = dict(episodes=300, lr_actor=0.0009, lr_critic=0.009)
        base.update(kw)
        return cls(**base)

    @property
    def effective_warmup(self) -> int:
        return self.batch if self.warmup is None else max(self.warmup, self.batch)


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: float
    r: float
    s_next: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int = STATE_DIM):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros(capacity)
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, state_dim))
        self._d = np.zeros(capacity)
        self._count = 0

    def __len__(self) -> int:
        return min(self._count, self.capacity)

    def push(self, t: Transition) -> None:
        k = self._count % self.capacity
        self._s[k] = t.s
        self._a[k] = t.a
        self._r[k] = t.r
        self._s2[k] = t.s_next
        self._d[k] = 1.0 if t.done else 0.0
        self._count += 1

    def sample(self, rng: np.random.Generator, batch: int):
        """Uniform sample with replacement; returns array copies."""
        n = len(self)
        if n < batch:
            raise ValueError(f"buffer holds {n} transitions, batch needs {batch}")
        idx = rng.integers(0, n, size=batch)
        return (
            self._s[idx],
            self._a[idx].reshape(-1, 1),
            self._r[idx].reshape(-1, 1),
            self._s2[idx],
            self._d[idx].reshape(-1, 1),
        )


@dataclass
class Agent:
    actor: Mlp
    critic: Mlp
    actor_target: Mlp
    critic_target: Mlp
    actor_opt: AdamState
    critic_opt: AdamState
    buffer: ReplayBuffer
    hp: Hyperparams
    rng: np.random.Generator


def make_agent(
    hp: Hyperparams,
    rng: np.random.Generator,
    actor_arch: Sequence[LayerSpec] | None = None,
    critic_arch: Sequence[LayerSpec] | None = None,
) -> Agent:
    """Fresh agent; targets start as exact copies of the online networks."""
    actor = init_network(actor_arch or actor_specs(), rng)
    critic = init_network(critic_arch or critic_specs(), rng)
    return Agent(
        actor=actor,
        critic=critic,
        actor_target=actor.copy(),
        critic_target=critic.copy(),
        actor_opt=AdamState.for_net(actor),
        critic_opt=AdamState.for_net(critic),
        buffer=ReplayBuffer(hp.memory, state_dim=actor.in_dim),
        hp=hp,
        rng=rng,
    )


def act(agent: Agent, s_norm: np.ndarray) -> float:
    """Greedy action from the online actor; exploration is layered on elsewhere."""
    return float(forward(agent.actor, np.asarray(s_norm, dtype=float))[0])


def remember(agent: Agent, t: Transition) -> None:
    agent.buffer.push(t)


def soft_update(online: Mlp, target: Mlp, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, element-wise, in place."""
    if online.specs != target.specs:
        raise ValueError("online/target architectures differ")
    target.theta[:] = tau * online.theta + (1.0 - tau) * target.theta


def _clip_grad(g: np.ndarray, limit: float | None) -> np.ndarray:
    if limit is None:
        return g
    norm = float(np.linalg.norm(g))
    if norm > limit and norm > 0:
        return g * (limit / norm)
    return g


def bootstrap_targets(agent: Agent, r: np.ndarray, s2: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Critic regression targets y = r + gamma * (1 - done) * Q'(s', mu'(s'))."""
    a2 = forward(agent.actor_target, s2)
    q2 = forward(agent.critic_target, np.concatenate([s2, a2], axis=1))
    return r + agent.hp.gamma * (1.0 - d) * q2


def learn_step(agent: Agent) -> dict | None:
    """One gradient update of critic and actor plus target soft updates.

    Returns per-step diagnostics, or None (no-op) while the buffer is still
    shorter than the batch size.
    """
    hp = agent.hp
    if len(agent.buffer) < hp.batch:
        return None
    s, a, r, s2, d = agent.buffer.sample(agent.rng, hp.batch)
    n = hp.batch

    # Critic regression toward the bootstrapped target.
    y = bootstrap_targets(agent, r, s2, d)
    q, trace_q = forward_trace(agent.critic, np.concatenate([s, a], axis=1))
    td = q - y
    critic_loss = float(np.mean(td**2))
    g_critic, _ = backward_trace(agent.critic, trace_q, 2.0 * td / n)
    adam_step(agent.critic, _clip_grad(g_critic, hp.grad_clip), agent.critic_opt, hp.lr_critic)

    # Actor ascends the critic's value of its own actions.
    a_pi, trace_pi = forward_trace(agent.actor, s)
    q_pi, trace_qpi = forward_trace(agent.critic, np.concatenate([s, a_pi], axis=1))
    actor_objective = float(np.mean(q_pi))
    _, g_input = backward_trace(agent.critic, trace_qpi, np.full((n, 1), 1.0 / n))
    dq_da = g_input[:, s.shape[1] :]
    g_actor, _ = backward_trace(agent.actor, trace_pi, -dq_da)
    adam_step(agent.actor, _clip_grad(g_actor, hp.grad_clip), agent.actor_opt, hp.lr_actor)

    soft_update(agent.critic, agent.critic_target, hp.tau)
    soft_update(agent.actor, agent.actor_target, hp.tau)
    return {"critic_loss": critic_loss, "actor_objective": actor_objective}


def _assert_finite(agent: Agent, episode: int) -> None:
    for name, network in (
        ("actor", agent.actor),
        ("critic", agent.critic),
        ("actor_target", agent.actor_target),
        ("critic_target", agent.critic_target),
    ):
        if not np.all(np.isfinite(network.theta)):
            raise RuntimeError(
                f"non-finite parameter in {name} after episode {episode}; "
                "lower the learning rates or enable grad_clip"
            )


def train(
    agent: Agent,
    env: CycleEnv,
    noise_spec: explore.NoiseSpec,
    episodes: int,
    rng: np.random.Generator,
) -> list[float]:
    """Run the training loop and return per-episode returns.

    Episodes round-robin over the environment's cycle list.  Learning starts
    once the buffer holds `warmup` transitions and then happens every
    `learn_every` environment steps.  The exploration rng is separate from
    the agent's replay-sampling rng so both streams are reproducible.
    """
    curve: list[float] = []
    noise_state = explore.NoiseState()
    total_steps = 0
    for ep in range(episodes):
        state = env.reset(ep % env.num_cycles)
        explore.episode_reset(noise_spec, noise_state, agent.actor, rng)
        ep_return = 0.0
        done = env.done
        while not done:
            s_norm = normalize_state(state)
            u = explore.explore_action(noise_spec, noise_state, agent.actor, s_norm, rng)
            state, reward, done = env.step(u)
            remember(
                agent,
                Transition(s=s_norm, a=u, r=reward, s_next=normalize_state(state), done=done),
            )
            total_steps += 1
            if len(agent.buffer) >= agent.hp.effective_warmup and (
                total_steps % agent.hp.learn_every == 0
            ):
                learn_step(agent)
            ep_return += reward
        curve.append(float(ep_return))
        _assert_finite(agent, ep)
    return curve
