"""
FastAPI routes for the RelayBeam experiment service.
"""

from __future__ import annotations

import logging

from fastapi import APIRouter, HTTPException

from app.api.schemas import (
    DurationsInput,
    DurationsResult,
    GradcheckEntry,
    GradcheckInput,
    GradcheckResult,
    PolicyList,
    SteadyStateInput,
    SteadyStateResult,
    SweepFailure,
    SweepRequest,
    SweepResponse,
    SweepResultRow,
)
from app.beams.sweep import alignment_duration
from app.channel.paths import steady_state
from app.core.config import build_config
from app.core.errors import RelayBeamError
from app.core.state import AlignKind
from app.engine.experiment_engine import ExperimentEngine
from app.env.relay_env import state_dim
from app.nn.gradcheck import run_gradcheck
from app.policies.registry import list_policies

logger = logging.getLogger(__name__)

router = APIRouter()


# ── Link budget helpers ────────────────────────────────────────────

@router.post("/durations", response_model=DurationsResult)
async def get_durations(payload: DurationsInput) -> DurationsResult:
    """Alignment durations (slots) for IA/BT on direct and relayed links."""

    def duration(kind: AlignKind, indirect: bool) -> int:
        return alignment_duration(
            kind,
            indirect,
            payload.codebook_tx,
            payload.codebook_rx,
            payload.codebook_relay,
            payload.n_bt,
            payload.n_ss,
            payload.m_ss,
        )

    return DurationsResult(
        ia_direct=duration(AlignKind.INITIAL_ACCESS, False),
        ia_relay=duration(AlignKind.INITIAL_ACCESS, True),
        bt_direct=duration(AlignKind.BEAM_TRACKING, False),
        bt_relay=duration(AlignKind.BEAM_TRACKING, True),
    )


@router.post("/steady-state", response_model=SteadyStateResult)
async def get_steady_state(payload: SteadyStateInput) -> SteadyStateResult:
    """Long-run unblocked/blocked probabilities of the blockage chain."""
    try:
        q_u, q_b = steady_state(payload.p_ub, payload.p_bu)
    except RelayBeamError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return SteadyStateResult(q_u=q_u, q_b=q_b)


# ── Experiments ────────────────────────────────────────────────────

@router.post("/sweep", response_model=SweepResponse)
def run_sweep(payload: SweepRequest) -> SweepResponse:
    """
    Run a Monte-Carlo sweep for the given configuration.
    Intended for small configurations; large sweeps belong on the CLI.
    """
    try:
        data = dict(payload.config)
        if payload.seeds is not None:
            data["seeds"] = payload.seeds
        if payload.policies is not None:
            data["policies"] = payload.policies
        cfg = build_config(data)
        table = ExperimentEngine().run_sweep(cfg, horizon=payload.horizon)
    except KeyError as exc:
        raise HTTPException(status_code=404, detail=str(exc))
    except (RelayBeamError, ValueError) as exc:
        logger.exception("Sweep failed")
        raise HTTPException(status_code=400, detail=str(exc))

    return SweepResponse(
        sweep_axis=table.axis,
        config_hash=table.config_hash,
        rows=[SweepResultRow(**vars(r)) for r in table.rows],
        failures=[SweepFailure(**vars(f)) for f in table.failures],
    )


@router.get("/policies", response_model=PolicyList)
async def get_policies() -> PolicyList:
    """List the registered policy names."""
    return PolicyList(policies=list_policies())


# ── Diagnostics ────────────────────────────────────────────────────

@router.post("/gradcheck", response_model=GradcheckResult)
def gradcheck(payload: GradcheckInput) -> GradcheckResult:
    """Finite-difference check of actor and critic backpropagation."""
    dim = state_dim(payload.n_relays, payload.include_mode)
    try:
        reports = run_gradcheck(dim, payload.hidden, n_nets=payload.n_nets, seed=payload.seed)
    except ValueError as exc:
        logger.exception("Gradient check failed")
        raise HTTPException(status_code=400, detail=str(exc))

    entries = [
        GradcheckEntry(
            network=name,
            max_rel_error=r.max_rel_error,
            n_checked=r.n_checked,
            n_skipped=r.n_skipped,
            passed=r.passed(payload.tol),
        )
        for name, r in reports.items()
    ]
    return GradcheckResult(
        state_dim=dim, reports=entries, passed=all(e.passed for e in entries)
    )
