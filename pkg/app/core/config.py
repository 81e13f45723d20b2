"""
Experiment configuration.

Every model has working defaults, so an empty JSON document ``{}`` is a
valid LOS-scenario configuration.  Configurations are immutable; a sweep
point is derived with :meth:`ExperimentConfig.with_override`.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.errors import ConfigError

logger = logging.getLogger(__name__)

SWEEP_AXES = (
    "snr_db",
    "sigma_p",
    "sigma_a",
    "codebook_size",
    "n_ss",
    "m_ss",
    "q_b",
    "density",
    "speed_kmh",
    "n_relays",
)

POLICY_NAMES = ("genie", "drl", "threshold", "direct")


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# ── Channel ────────────────────────────────────────────────────────

class ChannelParams(_Frozen):
    """
    Per-hop channel parameters.

    ``n_tx`` / ``n_rx`` are the array sizes of the two hop endpoints;
    :meth:`ExperimentConfig.hop_params` fills them in per hop.
    """

    n_tx: int = Field(16, ge=1)
    n_rx: int = Field(16, ge=1)
    n_subcarriers: int = Field(256, ge=1, description="K")
    symbol_period: float = Field(1.0 / 1760e6, gt=0, description="T_s, seconds")
    n_taps: int = Field(4, ge=1, description="N_d")
    sigma_a: float = Field(0.5, ge=0, description="angular spread, radians")
    sigma_p: float = Field(0.005, ge=0, description="complex path gain spread")
    p_ub: float = Field(0.01, ge=0, le=1, description="unblocked -> blocked")
    p_bu: float = Field(0.99, ge=0, le=1, description="blocked -> unblocked")
    n_bl: int = Field(100, ge=1, description="slots per blockage epoch")
    gain: float = Field(1.0, gt=0, description="G, large-scale received power")
    noise_var: float = Field(1.0, gt=0, description="sigma_n^2")
    rolloff: float = Field(0.4, ge=0, le=1, description="raised-cosine roll-off")

    @property
    def snr_pre(self) -> float:
        """SNR prior to beamforming, G / sigma_n^2."""
        return self.gain / self.noise_var


# ── Beam management ───────────────────────────────────────────────

class BeamParams(_Frozen):
    codebook_tx: int = Field(16, ge=1, description="|F|")
    codebook_rx: int = Field(16, ge=1, description="|W|")
    codebook_relay: int = Field(16, ge=1, description="|G_n|")
    n_ss: int = Field(64, ge=1, description="SS blocks per burst")
    m_ss: int = Field(1, ge=1, description="slots per SS burst")
    n_bt: int = Field(4, ge=1, description="beam-tracking candidates")
    m_dt: int = Field(1, ge=1, description="data transmission length, slots")
    pilot_density: float = Field(
        0.1, ge=0, le=1, description="pilot fraction of a data frame"
    )


# ── Trace scenario ────────────────────────────────────────────────

class TraceRoles(_Frozen):
    tx: str
    rx: str
    relays: list[str] = Field(default_factory=list)


class MobilityParams(_Frozen):
    density: float = Field(10.0, gt=0, description="vehicles per km per lane")
    speed_kmh: float = Field(80.0, gt=0)
    speed_spread: float = Field(0.1, ge=0, lt=1, description="uniform +/- fraction")
    lanes: int = Field(3, ge=1)
    lane_width: float = Field(3.7, gt=0)
    road_length: float = Field(1000.0, gt=0)
    vehicle_length: float = Field(4.645, gt=0)
    vehicle_width: float = Field(1.8, gt=0)
    sample_period: float = Field(0.05, gt=0, description="trace sampling, seconds")
    link_distance: float = Field(60.0, gt=0, description="nominal tx-rx spacing, m")
    carrier_freq: float = Field(28e9, gt=0)
    trace_file: str | None = None
    roles: TraceRoles | None = None


# ── Learning ──────────────────────────────────────────────────────

class DdpgParams(_Frozen):
    gamma: float = Field(0.99, ge=0, le=1)
    eta: float = Field(0.005, ge=0, le=1)
    batch_size: int = Field(32, ge=1)
    buffer_capacity: int = Field(10_000, ge=1)
    ou_theta: float = Field(0.15, ge=0)
    ou_sigma: float = Field(0.2, ge=0)
    ou_dt: float = Field(1.0, gt=0)
    noise_decay: bool = False
    db_low: float = -20.0
    db_high: float = 20.0
    actor_lr: float = Field(1e-4, ge=0)
    critic_lr: float = Field(1e-3, ge=0)
    hidden: list[int] = Field(default_factory=lambda: [64, 64])

    @model_validator(mode="after")
    def _check_db_range(self) -> DdpgParams:
        if self.db_high <= self.db_low:
            raise ValueError("db_high must exceed db_low")
        return self


class SweepAxis(_Frozen):
    name: str = "snr_db"
    values: list[float] = Field(default_factory=lambda: [0.0])

    @model_validator(mode="after")
    def _check_axis(self) -> SweepAxis:
        if self.name not in SWEEP_AXES:
            raise ValueError(f"Unknown sweep axis {self.name!r}. Known: {list(SWEEP_AXES)}")
        if not self.values:
            raise ValueError("sweep axis needs at least one value")
        return self


# ── Experiment ────────────────────────────────────────────────────

class ExperimentConfig(_Frozen):
    scenario: Literal["los", "trace"] = "los"
    channel: ChannelParams = Field(default_factory=ChannelParams)
    beams: BeamParams = Field(default_factory=BeamParams)
    mobility: MobilityParams = Field(default_factory=MobilityParams)
    ddpg: DdpgParams = Field(default_factory=DdpgParams)

    n_relays: int = Field(2, ge=0, description="N_REL")
    n_relay_ant: int = Field(16, ge=1)
    snr_db: float = 0.0
    horizon: int = Field(200, ge=1, description="M, slots per run")
    slot_duration: float = Field(0.01, gt=0, description="seconds per slot")
    se_normalizer: float = Field(10.0, gt=0, description="bits/s/Hz mapped to 1.0")
    include_mode: bool = False
    drl_tail: int = Field(20, ge=1, description="slots averaged for the converged metric")

    seeds: list[int] = Field(default_factory=lambda: list(range(100)))
    grid_seeds: list[int] = Field(default_factory=lambda: list(range(1000, 1005)))
    calibration_seeds: list[int] = Field(default_factory=lambda: list(range(2000, 2005)))
    grid_points: int = Field(20, ge=2)
    grid_tau_max: float | None = Field(None, gt=0)

    policies: list[str] = Field(default_factory=lambda: list(POLICY_NAMES))
    sweep: SweepAxis = Field(default_factory=SweepAxis)

    @model_validator(mode="after")
    def _check_consistency(self) -> ExperimentConfig:
        if not self.seeds:
            raise ValueError("at least one evaluation seed is required")
        overlap = set(self.seeds) & (set(self.grid_seeds) | set(self.calibration_seeds))
        if overlap:
            raise ValueError(
                f"evaluation seeds overlap grid/calibration seeds: {sorted(overlap)}"
            )
        if self.scenario == "trace" and self.mobility.roles is not None:
            if len(self.mobility.roles.relays) != self.n_relays:
                raise ValueError("mobility.roles.relays must list n_relays vehicles")
        return self

    # ── Derived quantities ─────────────────────────────────────────

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    def hop_params(self, src: str, dst: str) -> ChannelParams:
        """
        Channel parameters for one hop, with array sizes of the endpoints and
        ``G`` set so that ``G / sigma_n^2`` equals the transmit SNR.
        """
        sizes = {"tx": self.channel.n_tx, "rx": self.channel.n_rx}
        n_tx = sizes.get(src, self.n_relay_ant)
        n_rx = sizes.get(dst, self.n_relay_ant)
        return self.channel.model_copy(
            update={
                "n_tx": n_tx,
                "n_rx": n_rx,
                "gain": self.snr_linear * self.channel.noise_var,
            }
        )

    def with_override(self, name: str, value: float) -> ExperimentConfig:
        """Return a copy with one sweep-axis parameter replaced."""
        if name not in SWEEP_AXES:
            raise ConfigError(f"Unknown sweep axis {name!r}")
        channel = self.channel
        beams = self.beams
        mobility = self.mobility
        top: dict[str, Any] = {}

        if name == "snr_db":
            top["snr_db"] = float(value)
        elif name == "sigma_p":
            # sigma_a is held at 0.5 while sigma_p varies
            channel = channel.model_copy(update={"sigma_p": float(value), "sigma_a": 0.5})
        elif name == "sigma_a":
            # ...and sigma_p at 0.005 while sigma_a varies
            channel = channel.model_copy(update={"sigma_a": float(value), "sigma_p": 0.005})
        elif name == "codebook_size":
            n_c = int(value)
            beams = beams.model_copy(
                update={"codebook_tx": n_c, "codebook_rx": n_c, "codebook_relay": n_c}
            )
        elif name == "n_ss":
            beams = beams.model_copy(update={"n_ss": int(value)})
        elif name == "m_ss":
            beams = beams.model_copy(update={"m_ss": int(value)})
        elif name == "q_b":
            q_b = float(value)
            channel = channel.model_copy(update={"p_ub": q_b, "p_bu": 1.0 - q_b})
        elif name == "density":
            mobility = mobility.model_copy(update={"density": float(value)})
        elif name == "speed_kmh":
            mobility = mobility.model_copy(update={"speed_kmh": float(value)})
        elif name == "n_relays":
            top["n_relays"] = int(value)

        data = self.model_dump()
        data.update(top)
        data["channel"] = channel.model_dump()
        data["beams"] = beams.model_dump()
        data["mobility"] = mobility.model_dump()
        return build_config(data)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON dump."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ── Loading ────────────────────────────────────────────────────────

def build_config(data: dict[str, Any]) -> ExperimentConfig:
    """Validate a raw mapping, re-raising validation failures as ConfigError."""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid experiment configuration: {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Load and validate a JSON experiment configuration file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"Config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    cfg = build_config(raw)
    logger.info("Loaded config %s (hash %s)", path, cfg.config_hash()[:12])
    return cfg
