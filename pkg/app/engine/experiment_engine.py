"""
ExperimentEngine — Monte-Carlo sweeps over one configuration axis.

For every sweep value the engine derives the point configuration, lets
each policy prepare shared work (threshold calibration), then runs every
(policy, seed) pair.  Runs fan out to a process pool when
``RELAYBEAM_THREADS`` > 1; results are merged by (sweep value, policy,
seed) so the output never depends on completion order.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import os
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from app.core.config import ExperimentConfig
from app.core.errors import ConfigError, TrainingDivergenceError
from app.engine.results import ResultRow, ResultTable, RunFailure
from app.policies.registry import create_policy, get_policy_class

logger = logging.getLogger(__name__)

THREADS_ENV = "RELAYBEAM_THREADS"


def worker_count() -> int:
    """Worker cap from ``RELAYBEAM_THREADS`` (default 1, in-process)."""
    raw = os.environ.get(THREADS_ENV, "1").strip()
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {n}")
    return n


@dataclass(frozen=True)
class RunJob:
    value_index: int
    sweep_value: float
    policy: str
    seed: int
    cfg: ExperimentConfig
    context: dict[str, Any]
    horizon: int | None = None


@dataclass(frozen=True)
class RunOutcome:
    value_index: int
    policy: str
    seed: int
    score: float | None
    error: str | None = None


def execute_job(job: RunJob) -> RunOutcome:
    """Run one (sweep value, policy, seed); divergence is reported, not raised."""
    policy = create_policy(job.policy)
    try:
        run = policy.run(job.cfg, job.seed, job.horizon, job.context)
    except TrainingDivergenceError as exc:
        logger.warning(
            "Run diverged: %s=%s policy=%s seed=%d: %s",
            job.cfg.sweep.name, job.sweep_value, job.policy, job.seed, exc,
        )
        return RunOutcome(job.value_index, job.policy, job.seed, None, str(exc))
    return RunOutcome(job.value_index, job.policy, job.seed, run.score)


class ExperimentEngine:
    """
    Usage
    -----
    >>> engine = ExperimentEngine()
    >>> table = engine.run_sweep(cfg)
    >>> emit_csv(table, "fig4.csv")
    """

    def __init__(self, workers: int | None = None) -> None:
        self.workers = workers or worker_count()

    # ── Public API ─────────────────────────────────────────────────

    def run_sweep(
        self,
        cfg: ExperimentConfig,
        seeds: Sequence[int] | None = None,
        policies: Sequence[str] | None = None,
        horizon: int | None = None,
    ) -> ResultTable:
        """
        Evaluate every policy on every seed at every sweep value.

        Returns
        -------
        ResultTable with one row per (sweep value, policy), in axis order
        then policy order.
        """
        seeds = list(cfg.seeds if seeds is None else seeds)
        policies = list(cfg.policies if policies is None else policies)
        if not seeds:
            raise ConfigError("run_sweep needs at least one seed")
        for name in policies:
            get_policy_class(name)

        axis = cfg.sweep
        n_slots = cfg.horizon if horizon is None else horizon
        logger.info(
            "Sweep %s over %s: policies=%s seeds=%d horizon=%d workers=%d hash=%s",
            axis.name, axis.values, policies, len(seeds), n_slots,
            self.workers, cfg.config_hash(),
        )
        logger.info("Hyperparameters: %s", cfg.model_dump_json())

        jobs: list[RunJob] = []
        for vi, value in enumerate(axis.values):
            point = cfg.with_override(axis.name, value)
            for name in policies:
                context = create_policy(name).prepare(point)
                jobs.extend(
                    RunJob(vi, float(value), name, seed, point, context, horizon) for seed in seeds
                )

        outcomes = self._execute(jobs)
        table = self._aggregate(cfg, policies, outcomes)
        logger.info("Sweep finished: %d rows, %d failed runs", len(table), len(table.failures))
        return table

    # ── Internals ──────────────────────────────────────────────────

    def _execute(self, jobs: list[RunJob]) -> list[RunOutcome]:
        if self.workers <= 1 or len(jobs) <= 1:
            return [execute_job(job) for job in jobs]
        ctx = mp.get_context("spawn")
        with ctx.Pool(processes=min(self.workers, len(jobs))) as pool:
            # map keeps job order, so merging is independent of scheduling
            return pool.map(execute_job, jobs)

    def _aggregate(
        self, cfg: ExperimentConfig, policies: list[str], outcomes: list[RunOutcome]
    ) -> ResultTable:
        ordered = sorted(
            outcomes, key=lambda o: (o.value_index, policies.index(o.policy), o.seed)
        )
        values = cfg.sweep.values
        table = ResultTable(axis=cfg.sweep.name, config_hash=cfg.config_hash())
        for vi, value in enumerate(values):
            for name in policies:
                cell = [o for o in ordered if o.value_index == vi and o.policy == name]
                scores = np.array([o.score for o in cell if o.score is not None])
                table.failures.extend(
                    RunFailure(float(value), name, o.seed, o.error or "")
                    for o in cell
                    if o.score is None
                )
                if scores.size == 0:
                    logger.warning("No successful runs for %s at %s=%s", name, cfg.sweep.name, value)
                    continue
                std = float(np.std(scores, ddof=1)) if scores.size > 1 else 0.0
                table.rows.append(
                    ResultRow(
                        sweep_value=float(value),
                        policy=name,
                        mean_se=float(np.mean(scores)),
                        std_se=std,
                        n_seeds=int(scores.size),
                    )
                )
            logger.info("Sweep point %s=%s done", cfg.sweep.name, value)
        return table


def run_sweep(
    cfg: ExperimentConfig,
    seeds: Sequence[int] | None = None,
    policies: Sequence[str] | None = None,
    horizon: int | None = None,
) -> ResultTable:
    """Module-level convenience around :meth:`ExperimentEngine.run_sweep`."""
    return ExperimentEngine().run_sweep(cfg, seeds, policies, horizon)
