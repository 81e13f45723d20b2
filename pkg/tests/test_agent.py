"""Tests for the DDPG threshold learner."""

import numpy as np
import pandas as pd
import pytest

from app.agent.ddpg import (
    LOG_COLUMNS,
    Batch,
    OuNoise,
    ReplayBuffer,
    Transition,
    actor_update,
    build_actor,
    build_critic,
    critic_update,
    map_action,
    policy_gradient,
    select_action,
    td_loss,
    train,
    write_training_log,
)
from app.core.config import build_config
from app.nn.mlp import Layer, MlpParams, predict
from app.nn.optim import AdamState

S_DIM = 9


def _small_cfg(**ddpg):
    return build_config(
        {
            "channel": {"n_tx": 4, "n_rx": 4, "n_subcarriers": 8},
            "beams": {"codebook_tx": 4, "codebook_rx": 4, "codebook_relay": 4, "n_ss": 4, "n_bt": 2},
            "n_relay_ant": 4,
            "horizon": 30,
            "seeds": [0],
            "ddpg": {"batch_size": 8, "hidden": [8, 8], **ddpg},
        }
    )


def _batch(rng, b=6):
    return Batch(
        s=rng.uniform(size=(b, S_DIM)),
        a=rng.uniform(-1, 1, size=(b, 2)),
        r=rng.uniform(0, 5, size=b),
        s_next=rng.uniform(size=(b, S_DIM)),
    )


def _nets(seed=0, hidden=(16, 16)):
    rng = np.random.default_rng(seed)
    return build_actor(S_DIM, list(hidden), rng), build_critic(S_DIM, list(hidden), rng)


# ── Actions and exploration ────────────────────────────────────────

def test_map_action_range():
    """Actor outputs map onto thresholds from 0.01 to 100 on a dB scale."""
    low = map_action(-1.0, -1.0)
    assert abs(low.tau_relay - 0.01) < 1e-12
    assert abs(low.tau_mode - 0.02) < 1e-12
    high = map_action(1.0, 1.0)
    assert abs(high.tau_relay - 100.0) < 1e-9
    assert abs(high.tau_mode - 200.0) < 1e-9
    mid = map_action(0.0, 0.0)
    assert abs(mid.tau_relay - 1.0) < 1e-12


def test_map_action_clips_and_orders():
    """Out-of-range outputs clip, and the mode threshold always exceeds the relay threshold."""
    assert map_action(5.0, -5.0) == map_action(1.0, -1.0)
    rng = np.random.default_rng(0)
    for a1, a2 in rng.uniform(-1, 1, size=(200, 2)):
        action = map_action(a1, a2)
        assert 0.0 < action.tau_relay < action.tau_mode


def test_select_action_without_noise_is_actor_output():
    """Without exploration the chosen action is the clipped actor output."""
    actor, _ = _nets()
    s = np.full(S_DIM, 0.5)
    raw, action = select_action(actor, s)
    assert np.allclose(raw, np.clip(predict(actor, s), -1, 1))
    assert action == map_action(raw[0], raw[1])


def test_ou_noise_is_zero_mean():
    """OU exploration noise averages out and resets to zero."""
    noise = OuNoise(2, np.random.default_rng(1))
    samples = np.array([noise.sample() for _ in range(100_000)])
    assert np.all(np.abs(samples.mean(axis=0)) < 0.05)
    noise.reset()
    assert np.array_equal(noise.state, np.zeros(2))


# ── Replay ─────────────────────────────────────────────────────────

def test_replay_buffer_is_bounded_fifo():
    """A full buffer drops its oldest transitions."""
    buf = ReplayBuffer(3)
    for k in range(5):
        buf.push(Transition(s=np.zeros(S_DIM), a=np.zeros(2), r=float(k), s_next=np.zeros(S_DIM)))
    assert len(buf) == 3
    batch = buf.sample(50, np.random.default_rng(0))
    assert len(batch) == 50
    assert set(batch.r.tolist()) <= {2.0, 3.0, 4.0}


def test_replay_buffer_validation():
    """Zero capacity, sampling an empty buffer and empty batches are rejected."""
    with pytest.raises(ValueError):
        ReplayBuffer(0)
    with pytest.raises(ValueError):
        ReplayBuffer(2).sample(1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        Batch.from_transitions([])


# ── Updates ────────────────────────────────────────────────────────

def test_td_loss_matches_direct_computation():
    """The batched TD loss equals a per-sample loop over the Bellman targets."""
    actor, critic = _nets(1)
    actor_tar, critic_tar = _nets(2)
    batch = _batch(np.random.default_rng(3))
    loss, _, _, _ = td_loss(critic, critic_tar, actor_tar, batch, 0.9)
    expected = 0.0
    for k in range(len(batch)):
        a_next = predict(actor_tar, batch.s_next[k])
        target = batch.r[k] + 0.9 * predict(critic_tar, np.concatenate([batch.s_next[k], a_next]))[0]
        q = predict(critic, np.concatenate([batch.s[k], batch.a[k]]))[0]
        expected += (target - q) ** 2
    expected /= len(batch)
    assert abs(loss - expected) < 1e-10


def test_critic_step_reduces_loss_on_single_sample():
    """One critic step lowers the TD loss it reports."""
    actor, critic = _nets(4)
    batch = _batch(np.random.default_rng(5), b=1)
    before, _, _, _ = td_loss(critic, critic, actor, batch, 0.5)
    new_critic, reported = critic_update(
        critic, critic, actor, batch, 0.5, AdamState.for_params(critic), 1e-4
    )
    assert reported == before
    after, _, _, _ = td_loss(new_critic, critic, actor, batch, 0.5)
    assert after < before


def test_actor_follows_critic_gradient():
    """The actor moves toward actions the critic scores higher."""
    actor, _ = _nets(6)
    # Q(s, a) = a_1
    w = np.zeros((1, S_DIM + 2))
    w[0, S_DIM] = 1.0
    critic = MlpParams([Layer(weights=w, bias=np.zeros(1), activation="linear")])
    states = np.random.default_rng(7).uniform(size=(8, S_DIM))
    before = predict(actor, states)[:, 0].mean()
    new_actor = actor_update(actor, critic, states, AdamState.for_params(actor), 1e-3)
    after = predict(new_actor, states)[:, 0].mean()
    assert after > before


def test_policy_gradient_matches_finite_differences():
    """Analytic policy gradients agree with central differences."""
    actor, critic = _nets(8, hidden=(6, 6))
    states = np.random.default_rng(9).uniform(size=(4, S_DIM))
    grads, objective = policy_gradient(actor, critic, states)

    def mean_q(p):
        a = predict(p, states)
        return float(predict(critic, np.concatenate([states, a], axis=1)).mean())

    assert abs(objective - mean_q(actor)) < 1e-12
    h = 1e-6
    for layer_idx, (i, j) in [(0, (0, 0)), (0, (3, 5)), (1, (2, 1)), (2, (1, 4))]:
        plus, minus = actor.copy(), actor.copy()
        plus.layers[layer_idx].weights[i, j] += h
        minus.layers[layer_idx].weights[i, j] -= h
        numeric = -(mean_q(plus) - mean_q(minus)) / (2 * h)
        assert abs(grads.d_weights[layer_idx][i, j] - numeric) < 1e-7


def test_actor_update_rejects_empty_batch():
    """An actor update needs at least one state."""
    actor, critic = _nets()
    with pytest.raises(ValueError):
        actor_update(actor, critic, np.zeros((0, S_DIM)), AdamState.for_params(actor), 1e-3)


# ── Training loop ──────────────────────────────────────────────────

def test_train_log_and_lengths(tmp_path):
    """Training logs one row per slot and starts learning once a batch is buffered."""
    cfg = _small_cfg()
    result = train(cfg, seed=0, record_genie=True)
    assert result.rewards.shape == (cfg.horizon,)
    assert list(result.log.columns) == LOG_COLUMNS
    assert len(result.log) == cfg.horizon
    assert result.log["slot"].tolist() == list(range(1, cfg.horizon + 1))
    # no update before the buffer holds a full batch
    assert result.log["loss"].iloc[:7].isna().all()
    assert result.log["loss"].iloc[7:].notna().all()
    assert np.all(result.rewards <= result.genie)
    assert (result.log["tau_mode"] > result.log["tau_relay"]).all()

    path = tmp_path / "training_log.csv"
    write_training_log(result.log, path)
    assert path.read_text(encoding="utf-8").splitlines()[0] == ",".join(LOG_COLUMNS)
    assert len(pd.read_csv(path)) == cfg.horizon


def test_train_is_deterministic():
    """The same seed reproduces rewards and actor weights."""
    cfg = _small_cfg(noise_decay=True)
    a = train(cfg, seed=3)
    b = train(cfg, seed=3)
    assert np.array_equal(a.rewards, b.rewards)
    for x, y in zip(a.actor.arrays(), b.actor.arrays()):
        assert np.array_equal(x, y)
    assert a.converged(5) == float(np.mean(a.rewards[-5:]))
