"""Tests for the sweep engine, result files and the policy registry."""

import json

import numpy as np
import pytest

from app.core.config import build_config
from app.core.errors import ConfigError, TrainingDivergenceError
from app.engine.experiment_engine import ExperimentEngine, worker_count
from app.engine.results import (
    RESULT_COLUMNS,
    ResultRow,
    ResultTable,
    emit_csv,
    emit_plotdata,
    read_csv,
)
from app.policies import registry
from app.policies.interface import PolicyInterface, PolicyRun
from app.policies.registry import create_policy, get_policy_class, list_policies, register_policy


def _small_cfg(**overrides):
    data = {
        "channel": {"n_tx": 4, "n_rx": 4, "n_subcarriers": 8},
        "beams": {"codebook_tx": 4, "codebook_rx": 4, "codebook_relay": 4, "n_ss": 4, "n_bt": 2},
        "n_relay_ant": 4,
        "horizon": 15,
        "seeds": [0, 1, 2],
        "policies": ["genie", "direct"],
        "sweep": {"name": "snr_db", "values": [0.0, 10.0]},
        **overrides,
    }
    return build_config(data)


class _FlakyPolicy(PolicyInterface):
    """Diverges on seed 1, constant rate otherwise."""

    name = "flaky"

    def run(self, cfg, seed, horizon=None, context=None, record_genie=False):
        if seed == 1:
            raise TrainingDivergenceError("critic loss is not finite (nan)")
        rewards = np.full(cfg.horizon if horizon is None else horizon, 2.0)
        return PolicyRun(policy=self.name, seed=seed, rewards=rewards, score=self.score(rewards, cfg))


# ── Registry ───────────────────────────────────────────────────────

def test_builtin_policies_registered():
    """The four built-in policies are registered."""
    assert {"genie", "drl", "threshold", "direct"} <= set(list_policies())
    assert create_policy("genie").name == "genie"


def test_unknown_policy():
    """Unknown names raise KeyError."""
    with pytest.raises(KeyError):
        get_policy_class("nope")


def test_register_policy(monkeypatch):
    """Registered policies can be created by name."""
    monkeypatch.setattr(registry, "_REGISTRY", dict(registry._REGISTRY))
    register_policy("flaky", _FlakyPolicy)
    assert isinstance(create_policy("flaky"), _FlakyPolicy)


# ── Worker count ───────────────────────────────────────────────────

def test_worker_count_default(monkeypatch):
    """One worker when RELAYBEAM_THREADS is unset."""
    monkeypatch.delenv("RELAYBEAM_THREADS", raising=False)
    assert worker_count() == 1


def test_worker_count_from_env(monkeypatch):
    """Worker count comes from RELAYBEAM_THREADS, whitespace allowed."""
    monkeypatch.setenv("RELAYBEAM_THREADS", " 4 ")
    assert worker_count() == 4


@pytest.mark.parametrize("raw", ["zero", "0", "-2"])
def test_worker_count_rejects_bad_values(monkeypatch, raw):
    """Non-numeric and non-positive worker counts are config errors."""
    monkeypatch.setenv("RELAYBEAM_THREADS", raw)
    with pytest.raises(ConfigError):
        worker_count()


# ── Sweeps ─────────────────────────────────────────────────────────

def test_sweep_rows_in_axis_then_policy_order():
    """Rows come out per sweep value then per policy, with direct under genie."""
    cfg = _small_cfg()
    table = ExperimentEngine(workers=1).run_sweep(cfg)
    assert [(r.sweep_value, r.policy) for r in table.rows] == [
        (0.0, "genie"),
        (0.0, "direct"),
        (10.0, "genie"),
        (10.0, "direct"),
    ]
    assert all(r.n_seeds == 3 for r in table.rows)
    assert table.axis == "snr_db"
    assert table.config_hash == cfg.config_hash()
    for value in (0.0, 10.0):
        assert table.mean(value, "direct") <= table.mean(value, "genie")
    # more SNR, more rate
    assert table.mean(10.0, "genie") > table.mean(0.0, "genie")


def test_sweep_overrides_and_validation():
    """Seeds, policies and horizon can be overridden per sweep."""
    cfg = _small_cfg()
    engine = ExperimentEngine(workers=1)
    table = engine.run_sweep(cfg, seeds=[5], policies=["genie"], horizon=5)
    assert len(table) == 2
    assert all(r.n_seeds == 1 and r.std_se == 0.0 for r in table.rows)
    with pytest.raises(KeyError):
        engine.run_sweep(cfg, policies=["nope"])
    with pytest.raises(ConfigError):
        engine.run_sweep(cfg, seeds=[])


def test_sweep_output_is_reproducible(tmp_path):
    """Two identical sweeps write byte-identical files."""
    cfg = _small_cfg()
    paths = []
    for k in range(2):
        table = ExperimentEngine(workers=1).run_sweep(cfg)
        paths.append(emit_csv(table, tmp_path / f"run{k}.csv"))
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_divergence_is_recorded_not_raised(monkeypatch):
    """A diverging seed is logged as a failure and left out of the mean."""
    monkeypatch.setattr(registry, "_REGISTRY", dict(registry._REGISTRY))
    register_policy("flaky", _FlakyPolicy)
    cfg = _small_cfg(sweep={"name": "snr_db", "values": [0.0]})
    table = ExperimentEngine(workers=1).run_sweep(cfg, policies=["flaky"])
    assert len(table) == 1
    assert table.rows[0].n_seeds == 2
    assert table.rows[0].mean_se == 2.0
    assert len(table.failures) == 1
    failure = table.failures[0]
    assert failure.seed == 1 and failure.policy == "flaky"
    assert "not finite" in failure.message


# ── Result files ───────────────────────────────────────────────────

def _table():
    return ResultTable(
        rows=[
            ResultRow(0.0, "genie", 3.0, 0.1, 2),
            ResultRow(0.0, "drl", 2.5, 0.2, 2),
            ResultRow(5.0, "genie", 4.0, 0.1, 2),
            ResultRow(5.0, "drl", 3.5, 0.3, 2),
        ],
        axis="sigma_p",
        config_hash="abc123",
    )


def test_result_row_validation():
    """Rows need at least one seed and a non-negative spread."""
    with pytest.raises(ValueError):
        ResultRow(0.0, "genie", 1.0, 0.0, 0)
    with pytest.raises(ValueError):
        ResultRow(0.0, "genie", 1.0, -0.1, 1)


def test_emit_and_read_csv(tmp_path):
    """CSV and metadata sidecar read back to the same table."""
    table = _table()
    path = emit_csv(table, tmp_path / "out.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(RESULT_COLUMNS)
    assert len(lines) == 5
    meta = json.loads((tmp_path / "out.meta.json").read_text(encoding="utf-8"))
    assert meta["config_hash"] == "abc123"
    assert meta["sweep_axis"] == "sigma_p"

    back = read_csv(path)
    assert back.rows == table.rows
    assert back.axis == "sigma_p"
    assert back.config_hash == "abc123"


def test_emit_plotdata_is_wide(tmp_path):
    """Plot data has one column pair per policy."""
    path = emit_plotdata(_table(), tmp_path / "plot.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "sweep_value,genie_mean,genie_std,drl_mean,drl_std"
    assert len(lines) == 3


def test_empty_table_is_not_written(tmp_path):
    """Empty tables raise and leave no file behind."""
    with pytest.raises(ValueError):
        emit_csv(ResultTable(), tmp_path / "empty.csv")
    with pytest.raises(ValueError):
        emit_plotdata(ResultTable(), tmp_path / "empty.csv")
    assert not (tmp_path / "empty.csv").exists()


# ── Built-in policies ──────────────────────────────────────────────

def test_threshold_policy_prepares_grid_optimum():
    """The threshold policy runs with the grid-search optimum."""
    cfg = _small_cfg(grid_tau_max=2.0, grid_points=2, horizon=10)
    policy = create_policy("threshold")
    context = policy.prepare(cfg)
    assert context["tau_max"] == 2.0
    assert (context["tau_relay"], context["tau_mode"]) in {(0.0, 0.0), (0.0, 2.0), (2.0, 2.0)}
    run = policy.run(cfg, 0, context=context)
    assert run.rewards.shape == (10,)
    assert run.score == float(np.mean(run.rewards))


def test_drl_policy_scores_the_tail():
    """DRL scores the last drl_tail slots; others score the whole run."""
    cfg = _small_cfg(drl_tail=3)
    rewards = np.array([0.0, 0.0, 1.0, 2.0, 3.0])
    assert create_policy("drl").score(rewards, cfg) == 2.0
    assert create_policy("genie").score(rewards, cfg) == 1.2


def test_genie_policy_run():
    """Genie rewards are their own genie trace."""
    cfg = _small_cfg()
    run = create_policy("genie").run(cfg, 0, horizon=6, record_genie=True)
    assert run.policy == "genie"
    assert np.array_equal(run.rewards, run.genie)
