"""
Policy Interface — abstract base for every relay/beam management policy.

Design: Strategy pattern.  The experiment engine looks policies up by name
and only talks to this interface, so a new policy plugs in by subclassing
and registering it.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np

from app.core.config import ExperimentConfig


@dataclass
class PolicyRun:
    """Outcome of one policy on one seed."""

    policy: str
    seed: int
    rewards: np.ndarray
    score: float
    genie: np.ndarray | None = None


class PolicyInterface(ABC):
    """
    A policy turns (configuration, seed) into a per-slot reward trace.
    """

    name: ClassVar[str] = ""

    def prepare(self, cfg: ExperimentConfig) -> dict[str, Any]:
        """
        Work shared by every seed of one sweep point (e.g. threshold
        calibration).  The returned context is passed to :meth:`run`; it
        must be picklable.
        """
        return {}

    @abstractmethod
    def run(
        self,
        cfg: ExperimentConfig,
        seed: int,
        horizon: int | None = None,
        context: dict[str, Any] | None = None,
        record_genie: bool = False,
    ) -> PolicyRun:
        """
        Run the policy for *horizon* slots (default ``cfg.horizon``).

        Returns
        -------
        PolicyRun with the per-slot rewards and the per-seed score.
        """
        ...

    def score(self, rewards: np.ndarray, cfg: ExperimentConfig) -> float:
        """Running-average spectral efficiency over the whole run."""
        return float(np.mean(rewards))
