"""Tests for the genie, direct and fixed-threshold comparison policies."""

import numpy as np
import pandas as pd
import pytest

from app.baselines.baselines import (
    GridSpec,
    estimate_tau_max,
    grid_search_thresholds,
    percentile_99,
    run_direct,
    run_genie,
    run_threshold,
    write_threshold_table,
)
from app.core.config import build_config
from app.core.errors import InsufficientSamplesError
from app.core.state import Mode, ThresholdAction


def _small_cfg(**overrides):
    data = {
        "channel": {"n_tx": 4, "n_rx": 4, "n_subcarriers": 8},
        "beams": {"codebook_tx": 4, "codebook_rx": 4, "codebook_relay": 4, "n_ss": 4, "n_bt": 2},
        "n_relay_ant": 4,
        "horizon": 30,
        "seeds": [0, 1],
        **overrides,
    }
    return build_config(data)


def test_grid_pairs_are_admissible():
    """Grid pairs keep the relay threshold at or below the mode threshold."""
    pairs = GridSpec(tau_max=1.0, n_points=2).pairs()
    assert pairs == [
        ThresholdAction(0.0, 0.0),
        ThresholdAction(0.0, 1.0),
        ThresholdAction(1.0, 1.0),
    ]
    assert len(GridSpec(tau_max=3.0, n_points=20).pairs()) == 20 * 21 // 2


def test_grid_spec_validation():
    """Grid needs a positive upper bound and at least two points."""
    with pytest.raises(ValueError):
        GridSpec(tau_max=0.0)
    with pytest.raises(ValueError):
        GridSpec(tau_max=1.0, n_points=1)


def test_percentile_99_of_uniform():
    """99th percentile of uniform samples."""
    samples = np.random.default_rng(0).uniform(size=10_000)
    assert abs(percentile_99(samples) - 0.99) < 0.02


def test_percentile_99_needs_samples():
    """Fewer than 100 samples is an error."""
    with pytest.raises(InsufficientSamplesError):
        percentile_99(np.ones(99))
    assert percentile_99(np.ones(100)) == 1.0


def test_direct_never_beats_genie():
    """Direct rates never exceed the genie rate of the same slot."""
    cfg = _small_cfg()
    for seed in (0, 1, 2):
        direct = run_direct(cfg, seed)
        assert len(direct) == cfg.horizon
        assert np.all(direct.rewards <= direct.genie)
        assert np.array_equal(direct.genie, run_genie(cfg, seed).rewards)


def test_run_threshold_records_slots():
    """Fixed thresholds start with the initial sweep and record mode and link per slot."""
    cfg = _small_cfg()
    trace = run_threshold(cfg, 0, ThresholdAction(0.5, 1.0), record_genie=True)
    assert len(trace) == cfg.horizon
    assert len(trace.modes) == len(trace.relays) == cfg.horizon
    # the first slots are the initial beam sweep on the direct link
    assert trace.modes[0] is Mode.ALIGNMENT
    assert trace.rewards[0] == 0.0
    assert np.all(trace.rewards <= trace.genie)
    assert run_threshold(cfg, 0, ThresholdAction(0.5, 1.0)).genie is None


def test_zero_horizon_runs_no_slots():
    """An explicit horizon of zero is honoured rather than replaced by the default."""
    cfg = _small_cfg()
    assert len(run_genie(cfg, 0, horizon=0)) == 0
    assert len(run_direct(cfg, 0, horizon=0)) == 0
    assert len(run_threshold(cfg, 0, ThresholdAction(0.5, 1.0), horizon=0)) == 0


def test_estimate_tau_max():
    """Upper grid bound is the 99th percentile of genie rates."""
    cfg = _small_cfg(horizon=50)
    tau_max = estimate_tau_max(cfg, seeds=[2000, 2001])
    samples = np.concatenate([run_genie(cfg, s).rewards for s in (2000, 2001)])
    assert tau_max == pytest.approx(np.percentile(samples, 99))
    assert tau_max <= samples.max()
    with pytest.raises(InsufficientSamplesError):
        estimate_tau_max(cfg, seeds=[2000], horizon=50)


def test_grid_search_picks_best_pair(tmp_path):
    """Grid search scores every pair and keeps the first best one."""
    cfg = _small_cfg(horizon=20)
    grid = GridSpec(tau_max=2.0, n_points=3)
    result = grid_search_thresholds(cfg, grid, seeds=[1000, 1001])
    assert len(result.table) == 6
    assert result.best_reward == result.table["mean_reward"].max()
    expected = [
        np.mean([run_threshold(cfg, s, a).rewards.sum() for s in (1000, 1001)])
        for a in grid.pairs()
    ]
    assert np.allclose(result.table["mean_reward"], expected)
    first_best = grid.pairs()[int(np.argmax(expected))]
    assert result.best == first_best

    path = tmp_path / "grid.csv"
    write_threshold_table(result.table, path)
    back = pd.read_csv(path)
    assert list(back.columns) == ["tau_relay", "tau_mode", "mean_reward"]
    assert len(back) == 6


def test_grid_search_needs_seeds():
    """Grid search without seeds is rejected."""
    with pytest.raises(ValueError):
        grid_search_thresholds(_small_cfg(), GridSpec(tau_max=1.0, n_points=2), seeds=[])
