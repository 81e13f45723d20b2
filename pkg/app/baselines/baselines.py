"""
Reference policies: genie-aided upper bound, direct link only, and the
threshold heuristic with fixed thresholds found by exhaustive grid search.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from app.core.config import ExperimentConfig
from app.core.errors import InsufficientSamplesError
from app.core.state import Mode, ThresholdAction
from app.env.relay_env import RelayBeamEnv

logger = logging.getLogger(__name__)

MIN_PERCENTILE_SAMPLES = 100


@dataclass
class RewardTrace:
    """Per-slot rewards of one run, with the genie value of each slot when recorded."""

    rewards: np.ndarray
    genie: np.ndarray | None = None
    modes: list[Mode] = field(default_factory=list)
    relays: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.rewards.shape[0])


def run_genie(cfg: ExperimentConfig, seed: int, horizon: int | None = None) -> RewardTrace:
    """Best link and best beams every slot, no alignment overhead."""
    horizon = cfg.horizon if horizon is None else horizon
    env = RelayBeamEnv(cfg)
    env.reset(seed)
    rewards = np.zeros(horizon)
    for m in range(horizon):
        rewards[m] = env.genie_reward()
        env.advance()
    return RewardTrace(rewards=rewards, genie=rewards.copy())


def run_direct(cfg: ExperimentConfig, seed: int, horizon: int | None = None) -> RewardTrace:
    """Genie-style best beams, restricted to the direct link."""
    horizon = cfg.horizon if horizon is None else horizon
    env = RelayBeamEnv(cfg)
    env.reset(seed)
    rewards = np.zeros(horizon)
    genie = np.zeros(horizon)
    for m in range(horizon):
        genie[m] = env.genie_reward()
        rewards[m] = env.direct_reward()
        env.advance()
    return RewardTrace(rewards=rewards, genie=genie)


def run_threshold(
    cfg: ExperimentConfig,
    seed: int,
    action: ThresholdAction,
    horizon: int | None = None,
    record_genie: bool = False,
) -> RewardTrace:
    """The threshold heuristic with *action* held fixed for the whole run."""
    horizon = cfg.horizon if horizon is None else horizon
    env = RelayBeamEnv(cfg, record_genie=record_genie)
    env.reset(seed)
    rewards = np.zeros(horizon)
    genie = np.zeros(horizon) if record_genie else None
    modes: list[Mode] = []
    relays: list[int] = []
    for m in range(horizon):
        out = env.step(action)
        rewards[m] = out.reward
        if genie is not None:
            genie[m] = out.info.genie
        modes.append(out.info.mode)
        relays.append(out.info.relay)
    return RewardTrace(rewards=rewards, genie=genie, modes=modes, relays=relays)


# ── Threshold calibration ──────────────────────────────────────────

@dataclass(frozen=True)
class GridSpec:
    tau_max: float
    n_points: int = 20

    def __post_init__(self) -> None:
        if not self.tau_max > 0:
            raise ValueError(f"tau_max must be positive, got {self.tau_max}")
        if self.n_points < 2:
            raise ValueError("grid needs at least 2 points per axis")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(0.0, self.tau_max, self.n_points)

    def pairs(self) -> list[ThresholdAction]:
        """Admissible (tau_relay <= tau_mode) grid points, row-major."""
        v = self.values
        return [
            ThresholdAction(tau_relay=float(r), tau_mode=float(m))
            for i, r in enumerate(v)
            for m in v[i:]
        ]


def percentile_99(samples: Sequence[float] | np.ndarray) -> float:
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size < MIN_PERCENTILE_SAMPLES:
        raise InsufficientSamplesError(
            f"need at least {MIN_PERCENTILE_SAMPLES} samples for a 99th percentile, "
            f"got {samples.size}"
        )
    return float(np.percentile(samples, 99))


def estimate_tau_max(
    cfg: ExperimentConfig, seeds: Sequence[int] | None = None, horizon: int | None = None
) -> float:
    """99th percentile of per-slot genie rates over the calibration seeds."""
    seeds = list(cfg.calibration_seeds if seeds is None else seeds)
    samples = np.concatenate([run_genie(cfg, s, horizon).rewards for s in seeds]) if seeds else []
    tau_max = percentile_99(samples)
    logger.info("tau_max = %.4f bits/s/Hz from %d genie slots", tau_max, len(samples))
    return tau_max


@dataclass
class GridResult:
    best: ThresholdAction
    best_reward: float
    table: pd.DataFrame


def grid_search_thresholds(
    cfg: ExperimentConfig,
    grid: GridSpec,
    seeds: Sequence[int] | None = None,
    horizon: int | None = None,
) -> GridResult:
    """
    Evaluate every admissible grid pair on *seeds* (default the grid seeds)
    and keep the pair with the largest mean cumulative reward.  Ties keep
    the first pair in row-major order.
    """
    seeds = list(cfg.grid_seeds if seeds is None else seeds)
    if not seeds:
        raise ValueError("grid search needs at least one seed")
    rows = []
    for action in grid.pairs():
        totals = [run_threshold(cfg, s, action, horizon).rewards.sum() for s in seeds]
        rows.append(
            {
                "tau_relay": action.tau_relay,
                "tau_mode": action.tau_mode,
                "mean_reward": float(np.mean(totals)),
            }
        )
    table = pd.DataFrame(rows, columns=["tau_relay", "tau_mode", "mean_reward"])
    best_idx = int(table["mean_reward"].to_numpy().argmax())
    best = ThresholdAction(
        tau_relay=float(table.at[best_idx, "tau_relay"]),
        tau_mode=float(table.at[best_idx, "tau_mode"]),
    )
    logger.info(
        "Grid search over %d pairs x %d seeds: best (%.4f, %.4f) mean reward %.4f",
        len(table), len(seeds), best.tau_relay, best.tau_mode, table.at[best_idx, "mean_reward"],
    )
    return GridResult(best=best, best_reward=float(table.at[best_idx, "mean_reward"]), table=table)


def write_threshold_table(table: pd.DataFrame, path: str | Path) -> None:
    table.to_csv(
        Path(path), index=False, columns=["tau_relay", "tau_mode", "mean_reward"], lineterminator="\n"
    )
