"""
DDPG learner for the two relay thresholds.

One environment slot is one agent iteration: the online actor (plus
Ornstein-Uhlenbeck exploration) proposes raw actions in [-1, 1]^2, which
are mapped to ``(tau_relay, tau_mode)`` through a dB parameterisation.
Transitions go into a replay buffer sampled with replacement; critic and
actor take one Adam step per slot once the buffer holds a full batch, and
both target networks track the online ones with rate ``eta``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from app.core.config import DdpgParams, ExperimentConfig
from app.core.errors import TrainingDivergenceError
from app.core.state import ThresholdAction
from app.env.relay_env import RelayBeamEnv, state_dim
from app.nn.mlp import GradientSet, MlpParams, backward, forward, init_mlp, soft_update
from app.nn.optim import AdamState, adam_step

logger = logging.getLogger(__name__)

ACTION_DIM = 2
FINAL_ACTOR_SCALE = 3e-3
LOG_COLUMNS = ["slot", "reward", "loss", "tau_relay", "tau_mode", "n", "n_mode"]


# ── Data ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray


@dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray

    def __len__(self) -> int:
        return int(self.r.shape[0])

    @classmethod
    def from_transitions(cls, items: list[Transition]) -> Batch:
        if not items:
            raise ValueError("batch must not be empty")
        return cls(
            s=np.stack([t.s for t in items]),
            a=np.stack([t.a for t in items]),
            r=np.asarray([t.r for t in items], dtype=np.float64),
            s_next=np.stack([t.s_next for t in items]),
        )


class ReplayBuffer:
    """Bounded FIFO of transitions, sampled uniformly with replacement."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0

    def push(self, t: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(t)
        else:
            self._items[self._next] = t
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._items), size=batch_size)
        return Batch.from_transitions([self._items[i] for i in idx])

    def __len__(self) -> int:
        return len(self._items)


class OuNoise:
    """Ornstein-Uhlenbeck process around zero."""

    def __init__(
        self,
        dim: int,
        rng: np.random.Generator,
        theta: float = 0.15,
        sigma: float = 0.2,
        dt: float = 1.0,
    ) -> None:
        self.dim = dim
        self.rng = rng
        self.theta = theta
        self.sigma = sigma
        self.dt = dt
        self.state = np.zeros(dim)

    def reset(self) -> None:
        self.state = np.zeros(self.dim)

    def sample(self) -> np.ndarray:
        dx = -self.theta * self.state * self.dt + self.sigma * np.sqrt(self.dt) * self.rng.normal(
            size=self.dim
        )
        self.state = self.state + dx
        if not np.all(np.isfinite(self.state)):
            raise TrainingDivergenceError("exploration noise became non-finite")
        return self.state.copy()


# ── Actions ────────────────────────────────────────────────────────

def map_action(
    a1: float, a2: float, db_low: float = -20.0, db_high: float = 20.0
) -> ThresholdAction:
    """
    Raw actions in [-1, 1] to thresholds:
    ``tau_relay = 10^(a1'/10)``, ``tau_mode = tau_relay + 10^(a2'/10)`` where
    ``a'`` is the raw value mapped linearly onto [db_low, db_high].
    """
    a1 = float(np.clip(a1, -1.0, 1.0))
    a2 = float(np.clip(a2, -1.0, 1.0))
    span = db_high - db_low
    d1 = db_low + (a1 + 1.0) / 2.0 * span
    d2 = db_low + (a2 + 1.0) / 2.0 * span
    tau_relay = 10.0 ** (d1 / 10.0)
    return ThresholdAction(tau_relay=tau_relay, tau_mode=tau_relay + 10.0 ** (d2 / 10.0))


def select_action(
    actor: MlpParams,
    s: np.ndarray,
    noise: OuNoise | None = None,
    db_low: float = -20.0,
    db_high: float = 20.0,
    noise_scale: float = 1.0,
) -> tuple[np.ndarray, ThresholdAction]:
    """Clamped actor output plus exploration noise, and its thresholds."""
    mu, _ = forward(actor, s)
    raw = mu if noise is None else mu + noise_scale * noise.sample()
    raw = np.clip(raw, -1.0, 1.0)
    return raw, map_action(raw[0], raw[1], db_low, db_high)


# ── Networks ───────────────────────────────────────────────────────

def build_actor(s_dim: int, hidden: list[int], rng: np.random.Generator) -> MlpParams:
    sizes = [s_dim, *hidden, ACTION_DIM]
    acts = ["tanh"] * len(hidden) + ["tanh"]
    return init_mlp(sizes, acts, rng, final_scale=FINAL_ACTOR_SCALE)


def build_critic(s_dim: int, hidden: list[int], rng: np.random.Generator) -> MlpParams:
    sizes = [s_dim + ACTION_DIM, *hidden, 1]
    acts = ["tanh"] * len(hidden) + ["linear"]
    return init_mlp(sizes, acts, rng)


def _q(critic: MlpParams, s: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, Any]:
    q, cache = forward(critic, np.concatenate([s, a], axis=1))
    return q[:, 0], cache


def td_loss(
    critic_on: MlpParams,
    critic_tar: MlpParams,
    actor_tar: MlpParams,
    batch: Batch,
    gamma: float,
) -> tuple[float, np.ndarray, np.ndarray, Any]:
    """Mean squared TD error with targets r + gamma Q_tar(s', mu_tar(s'))."""
    a_next, _ = forward(actor_tar, batch.s_next)
    q_next, _ = _q(critic_tar, batch.s_next, a_next)
    target = batch.r + gamma * q_next
    q, cache = _q(critic_on, batch.s, batch.a)
    loss = float(np.mean((target - q) ** 2))
    return loss, q, target, cache


def critic_update(
    critic_on: MlpParams,
    critic_tar: MlpParams,
    actor_tar: MlpParams,
    batch: Batch,
    gamma: float,
    opt: AdamState,
    lr: float,
) -> tuple[MlpParams, float]:
    """One Adam step on the TD loss; returns the new critic and the pre-step loss."""
    loss, q, target, cache = td_loss(critic_on, critic_tar, actor_tar, batch, gamma)
    if not np.isfinite(loss):
        raise TrainingDivergenceError(f"critic loss is not finite ({loss})")
    dq = (2.0 / len(batch)) * (q - target)
    grads, _ = backward(critic_on, cache, dq[:, None])
    return adam_step(critic_on, grads, opt, lr), loss


def policy_gradient(
    actor_on: MlpParams, critic_on: MlpParams, states: np.ndarray
) -> tuple[GradientSet, float]:
    """
    Gradient of ``-(1/B) sum Q(s, mu(s))`` w.r.t. the actor parameters and
    the objective ``(1/B) sum Q``.
    """
    a, a_cache = forward(actor_on, states)
    q, q_cache = _q(critic_on, states, a)
    b = states.shape[0]
    _, dx = backward(critic_on, q_cache, np.full((b, 1), -1.0 / b))
    grads, _ = backward(actor_on, a_cache, dx[:, states.shape[1]:])
    return grads, float(np.mean(q))


def actor_update(
    actor_on: MlpParams,
    critic_on: MlpParams,
    states: np.ndarray,
    opt: AdamState,
    lr: float,
) -> MlpParams:
    """One ascent step on the mean critic value of the actor's actions."""
    if states.shape[0] == 0:
        raise ValueError("batch must not be empty")
    grads, _ = policy_gradient(actor_on, critic_on, states)
    if not grads.is_finite():
        raise TrainingDivergenceError("non-finite policy gradient")
    return adam_step(actor_on, grads, opt, lr)


# ── Agent ──────────────────────────────────────────────────────────

class DdpgAgent:
    """Online/target actor-critic pair with optimiser state and replay."""

    def __init__(self, s_dim: int, params: DdpgParams, rng: np.random.Generator) -> None:
        self.params = params
        self.rng = rng
        self.actor = build_actor(s_dim, params.hidden, rng)
        self.critic = build_critic(s_dim, params.hidden, rng)
        self.actor_tar = self.actor.copy()
        self.critic_tar = self.critic.copy()
        self.actor_opt = AdamState.for_params(self.actor)
        self.critic_opt = AdamState.for_params(self.critic)
        self.buffer = ReplayBuffer(params.buffer_capacity)
        self.noise = OuNoise(
            ACTION_DIM, rng, theta=params.ou_theta, sigma=params.ou_sigma, dt=params.ou_dt
        )

    def act(self, s: np.ndarray, noise_scale: float = 1.0) -> tuple[np.ndarray, ThresholdAction]:
        return select_action(
            self.actor, s, self.noise, self.params.db_low, self.params.db_high, noise_scale
        )

    def learn(self) -> float | None:
        """One update if the buffer holds a full batch; returns the critic loss."""
        p = self.params
        if len(self.buffer) < p.batch_size:
            return None
        batch = self.buffer.sample(p.batch_size, self.rng)
        self.critic, loss = critic_update(
            self.critic, self.critic_tar, self.actor_tar, batch, p.gamma, self.critic_opt, p.critic_lr
        )
        self.actor = actor_update(self.actor, self.critic, batch.s, self.actor_opt, p.actor_lr)
        self.critic_tar = soft_update(self.critic_tar, self.critic, p.eta)
        self.actor_tar = soft_update(self.actor_tar, self.actor, p.eta)
        return loss


@dataclass
class TrainResult:
    rewards: np.ndarray
    actor: MlpParams
    critic: MlpParams
    log: pd.DataFrame
    genie: np.ndarray | None = None
    actions: list[ThresholdAction] = field(default_factory=list)

    def converged(self, tail: int = 20) -> float:
        """Mean reward of the last *tail* slots."""
        return float(np.mean(self.rewards[-tail:]))


def train(
    cfg: ExperimentConfig, seed: int, horizon: int | None = None, record_genie: bool = False
) -> TrainResult:
    """
    Run DDPG online for *horizon* slots (default ``cfg.horizon``) on a
    fresh environment seeded with *seed*.
    """
    horizon = cfg.horizon if horizon is None else horizon
    p = cfg.ddpg
    env = RelayBeamEnv(cfg, record_genie=record_genie)
    env.reset(seed)
    agent = DdpgAgent(state_dim(cfg.n_relays, cfg.include_mode), p, env.agent_rng)

    rewards = np.zeros(horizon)
    genie = np.zeros(horizon) if record_genie else None
    rows: list[dict[str, float]] = []
    actions: list[ThresholdAction] = []
    s = env.observe()
    for m in range(horizon):
        scale = 1.0 - m / horizon if p.noise_decay else 1.0
        raw, action = agent.act(s, scale)
        out = env.step(action)
        s_next = env.observe()
        agent.buffer.push(Transition(s=s, a=raw, r=out.reward, s_next=s_next))
        loss = agent.learn()
        rewards[m] = out.reward
        if genie is not None:
            genie[m] = out.info.genie
        actions.append(action)
        rows.append(
            {
                "slot": m + 1,
                "reward": out.reward,
                "loss": np.nan if loss is None else loss,
                "tau_relay": action.tau_relay,
                "tau_mode": action.tau_mode,
                "n": out.info.relay,
                "n_mode": int(out.info.mode),
            }
        )
        s = s_next

    result = TrainResult(
        rewards=rewards,
        actor=agent.actor,
        critic=agent.critic,
        log=pd.DataFrame(rows, columns=LOG_COLUMNS),
        genie=genie,
        actions=actions,
    )
    logger.info(
        "DDPG seed=%d: converged %.4f bits/s/Hz, final thresholds (%.3f, %.3f)",
        seed, result.converged(cfg.drl_tail), actions[-1].tau_relay, actions[-1].tau_mode,
    )
    return result


def write_training_log(log: pd.DataFrame, path: str | Path) -> None:
    """Training log as CSV with columns slot,reward,loss,tau_relay,tau_mode,n,n_mode."""
    log.to_csv(Path(path), index=False, columns=LOG_COLUMNS, lineterminator="\n")
