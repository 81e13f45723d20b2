"""Tests for the relay topology and the slot-level environment."""

import math
from pathlib import Path

import numpy as np
import pytest

from app.core.config import build_config
from app.core.state import (
    AlignKind,
    Behavior,
    LinkVector,
    Mode,
    ModeState,
    NetState,
    ThresholdAction,
)
from app.env.relay_env import (
    RelayBeamEnv,
    classify_behavior,
    encode_state,
    spawn_streams,
    state_dim,
)
from app.env.topology import RelayTopology

SAMPLE_TRACE = Path(__file__).resolve().parents[1] / "samples" / "sample_trace.csv"


def _small_cfg(**overrides):
    data = {
        "channel": {"n_tx": 4, "n_rx": 4, "n_subcarriers": 8},
        "beams": {"codebook_tx": 4, "codebook_rx": 4, "codebook_relay": 4, "n_ss": 4, "n_bt": 2},
        "n_relay_ant": 4,
        "horizon": 40,
        "seeds": [0, 1],
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value
    return build_config(data)


# ── Topology ───────────────────────────────────────────────────────

def test_topology_links_and_hops():
    """Link n goes through relay n; hops are listed per link."""
    topo = RelayTopology(2)
    assert topo.n_links == 3
    assert topo.link_nodes(0) == ["tx", "rx"]
    assert topo.link_hops(2) == [("tx", "relay2"), ("relay2", "rx")]
    assert topo.hops == [
        ("tx", "rx"),
        ("tx", "relay1"),
        ("relay1", "rx"),
        ("tx", "relay2"),
        ("relay2", "rx"),
    ]


def test_topology_without_relays():
    """Zero relays leave only the direct link; negative counts fail."""
    topo = RelayTopology(0)
    assert topo.n_links == 1
    with pytest.raises(ValueError):
        RelayTopology(-1)


# ── Pure helpers ───────────────────────────────────────────────────

def test_classify_behavior_boundaries():
    """Rates exactly on a threshold take the more cautious behaviour."""
    action = ThresholdAction(1.0, 2.0)
    assert classify_behavior(2.5, action) is Behavior.OPTIMISTIC
    assert classify_behavior(2.0, action) is Behavior.OPPORTUNISTIC
    assert classify_behavior(1.5, action) is Behavior.OPPORTUNISTIC
    assert classify_behavior(1.0, action) is Behavior.PESSIMISTIC
    assert classify_behavior(0.0, action) is Behavior.PESSIMISTIC
    with pytest.raises(ValueError):
        classify_behavior(-0.1, action)


def test_classify_behavior_zero_thresholds():
    """With zero thresholds only a zero rate is pessimistic."""
    action = ThresholdAction(0.0, 0.0)
    assert classify_behavior(1e-9, action) is Behavior.OPTIMISTIC
    assert classify_behavior(0.0, action) is Behavior.PESSIMISTIC


def test_state_dim():
    """Three entries per link plus the optional mode suffix."""
    assert state_dim(2) == 9
    assert state_dim(0) == 3
    assert state_dim(2, include_mode=True) == 9 + 4


def test_encode_state():
    """Indices and rates are normalised; the mode suffix is optional."""
    ns = NetState(links=[LinkVector(2, 3, 5.0), LinkVector(1, 2, 0.0)])
    ms = ModeState(relay=1, mode=Mode.DATA)
    vec = encode_state(ns, ms, 4, 4, 2, 10.0)
    assert np.allclose(vec, [0.5, 0.75, 0.5, 0.25, 1.0, 0.0])
    vec = encode_state(ns, ms, 4, 4, 2, 10.0, include_mode=True)
    assert np.allclose(vec[6:], [0.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        encode_state(ns, ms, 4, 4, 2, 0.0)


def test_spawn_streams_reproducible_and_distinct():
    """Streams repeat per seed and differ from each other."""
    a, b = spawn_streams(3), spawn_streams(3)
    assert a["channel"].random() == b["channel"].random()
    c = spawn_streams(3)
    assert c["channel"].random() != c["agent"].random()


# ── Environment ────────────────────────────────────────────────────

def test_step_requires_reset():
    """Stepping before reset fails."""
    env = RelayBeamEnv(_small_cfg())
    with pytest.raises(RuntimeError):
        env.step(ThresholdAction(0.0, 0.0))


def test_reset_starts_initial_access_on_direct_link():
    """Every run opens with initial access on the direct link."""
    env = RelayBeamEnv(_small_cfg())
    ns, ms = env.reset(0)
    assert len(ns) == 3
    assert all(link.s_last == 0.0 for link in ns.links)
    assert ms.mode is Mode.ALIGNMENT
    assert ms.relay == 0
    assert ms.align_kind is AlignKind.INITIAL_ACCESS
    assert ms.total_ba == 4
    assert env.observe().shape == (9,)


def test_alignment_slots_have_zero_reward():
    """Sweep slots earn nothing; the first data slot feeds back a positive rate."""
    env = RelayBeamEnv(_small_cfg(channel={"p_ub": 0.0}))
    env.reset(0)
    action = ThresholdAction(0.0, 0.0)
    outs = [env.step(action) for _ in range(4)]
    assert [o.reward for o in outs] == [0.0] * 4
    assert [o.info.finalized for o in outs] == [False, False, False, True]
    assert outs[-1].mode.mode is Mode.DATA
    data = env.step(action)
    assert data.info.mode is Mode.DATA
    assert data.reward > 0
    assert data.net.links[0].s_last == data.reward


def test_zero_thresholds_align_once_then_transmit():
    """Without blockage zero thresholds never trigger another sweep."""
    cfg = _small_cfg(channel={"p_ub": 0.0}, horizon=60)
    env = RelayBeamEnv(cfg)
    env.reset(7)
    action = ThresholdAction(0.0, 0.0)
    modes = [env.step(action).info.mode for _ in range(cfg.horizon)]
    assert modes[:4] == [Mode.ALIGNMENT] * 4
    assert modes[4:] == [Mode.DATA] * (cfg.horizon - 4)


def test_infinite_relay_threshold_switches_every_epoch():
    """An infinite relay threshold switches links at every decision."""
    cfg = _small_cfg(horizon=80)
    env = RelayBeamEnv(cfg)
    env.reset(2)
    action = ThresholdAction(math.inf, math.inf)
    decisions = 0
    for _ in range(cfg.horizon):
        out = env.step(action)
        if out.info.behavior is not None:
            decisions += 1
            assert out.info.behavior is Behavior.PESSIMISTIC
            assert out.info.switched
            assert out.mode.relay != out.info.relay
            assert out.mode.align_kind is AlignKind.INITIAL_ACCESS
    assert decisions > 0


def test_opportunistic_uses_beam_tracking():
    """Opportunistic decisions track beams on the same link."""
    cfg = _small_cfg(channel={"p_ub": 0.0}, horizon=30)
    env = RelayBeamEnv(cfg)
    env.reset(4)
    action = ThresholdAction(0.0, math.inf)
    tracked = False
    for _ in range(cfg.horizon):
        out = env.step(action)
        if out.info.behavior is Behavior.OPPORTUNISTIC:
            assert out.mode.relay == out.info.relay
            assert out.mode.align_kind is AlignKind.BEAM_TRACKING
            assert out.mode.total_ba == (1 if out.mode.relay == 0 else 2)
            tracked = True
    assert tracked


def test_same_seed_same_trajectory():
    """Same seed, same rewards."""
    cfg = _small_cfg()
    action = ThresholdAction(1.0, 2.0)
    runs = []
    for _ in range(2):
        env = RelayBeamEnv(cfg)
        env.reset(11)
        runs.append([env.step(action).reward for _ in range(cfg.horizon)])
    assert runs[0] == runs[1]


def test_genie_dominates_every_slot():
    """No threshold pair ever beats the genie in any slot."""
    cfg = _small_cfg(horizon=50)
    rng = np.random.default_rng(0)
    for seed in range(20):
        env = RelayBeamEnv(cfg, record_genie=True)
        env.reset(seed)
        for _ in range(cfg.horizon):
            lo, hi = np.sort(rng.uniform(0.0, 4.0, size=2))
            out = env.step(ThresholdAction(float(lo), float(hi)))
            assert out.reward <= out.info.genie


def test_genie_is_max_over_links():
    """Genie picks the best link; direct is link 0."""
    env = RelayBeamEnv(_small_cfg())
    env.reset(5)
    best = [env.link_best_se(n) for n in range(3)]
    assert env.genie_reward() == max(best)
    assert env.direct_reward() == best[0]


def test_trace_scenario_runs():
    """The sample trace drives the channels and starts with a blocked direct link."""
    cfg = _small_cfg(scenario="trace", mobility={"trace_file": str(SAMPLE_TRACE)}, horizon=20)
    env = RelayBeamEnv(cfg, record_genie=True)
    env.reset(0)
    # a vehicle sits between transmitter and receiver in the sample trace
    assert env.channels.hop(("tx", "rx")).pathset.paths[0].c_bl == 0
    for _ in range(cfg.horizon):
        out = env.step(ThresholdAction(0.5, 1.0))
        assert 0.0 <= out.reward <= out.info.genie


def test_trace_scenario_synthetic_highway():
    """Without a trace file a synthetic highway is generated."""
    cfg = _small_cfg(scenario="trace", mobility={"density": 40.0}, horizon=10)
    env = RelayBeamEnv(cfg)
    env.reset(1)
    for _ in range(cfg.horizon):
        env.step(ThresholdAction(0.0, 0.0))
    assert env.slot == cfg.horizon
