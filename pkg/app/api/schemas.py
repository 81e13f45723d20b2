"""
Pydantic schemas for the FastAPI endpoints.
"""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field


# ── Alignment durations ────────────────────────────────────────────

class DurationsInput(BaseModel):
    """Codebook sizes and SS-burst parameters."""

    codebook_tx: int = Field(16, ge=1, description="|F|")
    codebook_rx: int = Field(16, ge=1, description="|W|")
    codebook_relay: int = Field(16, ge=1, description="|G|")
    n_bt: int = Field(4, ge=1)
    n_ss: int = Field(64, ge=1)
    m_ss: int = Field(1, ge=1)


class DurationsResult(BaseModel):
    """Slots per alignment, keyed by procedure and link type."""

    ia_direct: int
    ia_relay: int
    bt_direct: int
    bt_relay: int


# ── Blockage chain ─────────────────────────────────────────────────

class SteadyStateInput(BaseModel):
    p_ub: float = Field(..., ge=0, le=1, description="unblocked -> blocked")
    p_bu: float = Field(..., ge=0, le=1, description="blocked -> unblocked")


class SteadyStateResult(BaseModel):
    q_u: float
    q_b: float


# ── Sweeps ─────────────────────────────────────────────────────────

class SweepRequest(BaseModel):
    """An experiment configuration plus optional run-size overrides."""

    config: dict[str, Any] = Field(
        default_factory=dict, description="ExperimentConfig JSON; {} uses defaults"
    )
    seeds: list[int] | None = Field(None, description="evaluation seeds (overrides config)")
    policies: list[str] | None = None
    horizon: int | None = Field(None, ge=1, description="slots per run")


class SweepResultRow(BaseModel):
    sweep_value: float
    policy: str
    mean_se: float
    std_se: float
    n_seeds: int


class SweepFailure(BaseModel):
    sweep_value: float
    policy: str
    seed: int
    message: str


class SweepResponse(BaseModel):
    sweep_axis: str
    config_hash: str
    rows: list[SweepResultRow]
    failures: list[SweepFailure] = Field(default_factory=list)


# ── Policies ───────────────────────────────────────────────────────

class PolicyList(BaseModel):
    policies: list[str]


# ── Gradient check ─────────────────────────────────────────────────

class GradcheckInput(BaseModel):
    n_relays: int = Field(2, ge=0)
    include_mode: bool = False
    hidden: list[int] = Field(default_factory=lambda: [64, 64])
    n_nets: int = Field(20, ge=1, le=200)
    seed: int = 0
    tol: float = Field(1e-4, gt=0)


class GradcheckEntry(BaseModel):
    network: str
    max_rel_error: float
    n_checked: int
    n_skipped: int
    passed: bool


class GradcheckResult(BaseModel):
    state_dim: int
    reports: list[GradcheckEntry]
    passed: bool

