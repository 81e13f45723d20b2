"""
Built-in policies: genie-aided, direct link, optimal fixed thresholds and
the DDPG threshold learner.
"""

from __future__ import annotations

import logging
from typing import Any

import numpy as np

from app.agent.ddpg import train
from app.baselines.baselines import (
    GridSpec,
    estimate_tau_max,
    grid_search_thresholds,
    run_direct,
    run_genie,
    run_threshold,
)
from app.core.config import ExperimentConfig
from app.core.state import ThresholdAction
from app.policies.interface import PolicyInterface, PolicyRun

logger = logging.getLogger(__name__)


class GeniePolicy(PolicyInterface):
    name = "genie"

    def run(
        self,
        cfg: ExperimentConfig,
        seed: int,
        horizon: int | None = None,
        context: dict[str, Any] | None = None,
        record_genie: bool = False,
    ) -> PolicyRun:
        trace = run_genie(cfg, seed, horizon)
        return PolicyRun(
            self.name, seed, trace.rewards, self.score(trace.rewards, cfg),
            genie=trace.genie if record_genie else None,
        )


class DirectPolicy(PolicyInterface):
    name = "direct"

    def run(
        self,
        cfg: ExperimentConfig,
        seed: int,
        horizon: int | None = None,
        context: dict[str, Any] | None = None,
        record_genie: bool = False,
    ) -> PolicyRun:
        trace = run_direct(cfg, seed, horizon)
        return PolicyRun(
            self.name, seed, trace.rewards, self.score(trace.rewards, cfg),
            genie=trace.genie if record_genie else None,
        )


class ThresholdPolicy(PolicyInterface):
    """Threshold heuristic with the grid-search optimal fixed thresholds."""

    name = "threshold"

    def prepare(self, cfg: ExperimentConfig) -> dict[str, Any]:
        tau_max = cfg.grid_tau_max or estimate_tau_max(cfg)
        if tau_max <= 0:
            # every calibration slot was blocked: any thresholds do equally well
            logger.warning("Genie rates are all zero; using zero thresholds")
            return {"tau_relay": 0.0, "tau_mode": 0.0, "tau_max": 0.0}
        result = grid_search_thresholds(cfg, GridSpec(tau_max=tau_max, n_points=cfg.grid_points))
        return {
            "tau_relay": result.best.tau_relay,
            "tau_mode": result.best.tau_mode,
            "tau_max": tau_max,
        }

    def run(
        self,
        cfg: ExperimentConfig,
        seed: int,
        horizon: int | None = None,
        context: dict[str, Any] | None = None,
        record_genie: bool = False,
    ) -> PolicyRun:
        context = context or self.prepare(cfg)
        action = ThresholdAction(context["tau_relay"], context["tau_mode"])
        trace = run_threshold(cfg, seed, action, horizon, record_genie=record_genie)
        return PolicyRun(
            self.name, seed, trace.rewards, self.score(trace.rewards, cfg), genie=trace.genie
        )


class DrlPolicy(PolicyInterface):
    """DDPG-tuned thresholds, scored on the last ``drl_tail`` slots."""

    name = "drl"

    def run(
        self,
        cfg: ExperimentConfig,
        seed: int,
        horizon: int | None = None,
        context: dict[str, Any] | None = None,
        record_genie: bool = False,
    ) -> PolicyRun:
        result = train(cfg, seed, horizon, record_genie=record_genie)
        return PolicyRun(
            self.name, seed, result.rewards, self.score(result.rewards, cfg), genie=result.genie
        )

    def score(self, rewards: np.ndarray, cfg: ExperimentConfig) -> float:
        return float(np.mean(rewards[-cfg.drl_tail:]))
