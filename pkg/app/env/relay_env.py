"""
RelayBeamEnv — the threshold heuristic as a slot-level environment.

Each call to :meth:`RelayBeamEnv.step` is one time slot.  The slot is
either an alignment slot (beam sweep, reward 0) or a data slot (reward =
measured spectral efficiency of the selected link).  At the end of every
data block the measured rate is compared with the two thresholds:

* above ``tau_mode``                 -> keep relay and beams
* above ``tau_relay``, up to ``tau_mode`` -> keep relay, beam tracking
* at or below ``tau_relay``          -> switch to the best other link, initial access

All channel randomness comes from per-seed streams so two policies run on
the same seed see the same channels.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from app.beams.rate import FeedbackState, effective_snr, measured_se, two_hop_se
from app.beams.sweep import (
    BeamPair,
    SweepSchedule,
    build_schedule,
    select_best,
    top_candidates,
)
from app.core.config import ExperimentConfig
from app.core.state import (
    AlignKind,
    Behavior,
    LinkVector,
    Mode,
    ModeState,
    NetState,
    StepInfo,
    ThresholdAction,
)
from app.env.topology import ChannelProcess, RelayTopology, build_channel_process

logger = logging.getLogger(__name__)

STREAMS = ("channel", "agent", "mobility")


def spawn_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for channels, the agent and mobility."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, children)}


def classify_behavior(s: float, action: ThresholdAction) -> Behavior:
    """
    Optimistic if S > tau_mode, opportunistic if tau_relay < S <= tau_mode,
    pessimistic if S <= tau_relay.
    """
    if s < 0:
        raise ValueError("measured spectral efficiency must be non-negative")
    if s > action.tau_mode:
        return Behavior.OPTIMISTIC
    if s > action.tau_relay:
        return Behavior.OPPORTUNISTIC
    return Behavior.PESSIMISTIC


def state_dim(n_relays: int, include_mode: bool = False) -> int:
    n_links = n_relays + 1
    return 3 * n_links + (n_links + 1 if include_mode else 0)


def encode_state(
    ns: NetState,
    ms: ModeState,
    codebook_tx: int,
    codebook_rx: int,
    codebook_relay: int,
    se_normalizer: float,
    include_mode: bool = False,
) -> np.ndarray:
    """
    Feature vector ``[i_tx/|F|, i_rx/|W or G|, s_last/norm]`` per link,
    optionally followed by a one-hot of the current relay and the mode flag.
    """
    if min(codebook_tx, codebook_rx, codebook_relay) < 1 or se_normalizer <= 0:
        raise ValueError("normalisers must be positive")
    feats: list[float] = []
    for n, link in enumerate(ns.links):
        inner = codebook_rx if n == 0 else codebook_relay
        feats.extend((link.i_tx / codebook_tx, link.i_rx / inner, link.s_last / se_normalizer))
    if include_mode:
        one_hot = [0.0] * len(ns.links)
        one_hot[ms.relay] = 1.0
        feats.extend(one_hot)
        feats.append(float(ms.mode))
    return np.asarray(feats, dtype=np.float64)


@dataclass
class EnvStep:
    net: NetState
    mode: ModeState
    reward: float
    measured: float
    info: StepInfo


@dataclass
class _AlignmentRun:
    schedule: SweepSchedule
    measurements: dict[int, dict[BeamPair, float]] = field(default_factory=dict)


class RelayBeamEnv:
    """
    Usage
    -----
    >>> env = RelayBeamEnv(cfg)
    >>> env.reset(seed=0)
    >>> out = env.step(ThresholdAction(1.0, 2.0))
    >>> out.reward
    """

    def __init__(self, cfg: ExperimentConfig, record_genie: bool = False) -> None:
        self.cfg = cfg
        self.record_genie = record_genie
        self.topology = RelayTopology(cfg.n_relays)
        self.snr = cfg.snr_linear
        self.net = NetState.initial(cfg.n_relays)
        self.mode = ModeState()
        self.slot = 0
        self.channels: ChannelProcess | None = None
        self.feedback = FeedbackState()
        self.streams: dict[str, np.random.Generator] = {}
        self._align: _AlignmentRun | None = None
        self._hop_beams: list[dict[int, BeamPair]] = []
        self._last_sweep: list[dict[int, dict[BeamPair, float]]] = []

    # ── Lifecycle ──────────────────────────────────────────────────

    def reset(self, seed: int) -> tuple[NetState, ModeState]:
        """Fresh channels and the initial decision state for *seed*."""
        self.streams = spawn_streams(seed)
        self.channels = build_channel_process(
            self.cfg, self.topology, self.streams["channel"], self.streams["mobility"]
        )
        self.net = NetState.initial(self.cfg.n_relays)
        self.slot = 0
        self.feedback.reset()
        n_links = self.topology.n_links
        self._hop_beams = [{} for _ in range(n_links)]
        self._last_sweep = [{} for _ in range(n_links)]
        self.mode = ModeState()
        self._start_alignment(0, AlignKind.INITIAL_ACCESS)
        logger.debug(
            "Reset seed=%d: %d links, %d hops, M_BA=%d",
            seed, n_links, len(self.topology.hops), self.mode.total_ba,
        )
        return self.net.snapshot(), copy.copy(self.mode)

    @property
    def agent_rng(self) -> np.random.Generator:
        return self.streams["agent"]

    def _require_channels(self) -> ChannelProcess:
        if self.channels is None:
            raise RuntimeError("call reset() before stepping the environment")
        return self.channels

    def observe(self) -> np.ndarray:
        b = self.cfg.beams
        return encode_state(
            self.net,
            self.mode,
            b.codebook_tx,
            b.codebook_rx,
            b.codebook_relay,
            self.cfg.se_normalizer,
            self.cfg.include_mode,
        )

    # ── Alignment ──────────────────────────────────────────────────

    def _start_alignment(self, relay: int, kind: AlignKind) -> None:
        candidates: dict[int, list[BeamPair]] | None = None
        if kind is AlignKind.BEAM_TRACKING:
            last = self._last_sweep[relay]
            n_hops = len(self.topology.link_hops(relay))
            if len(last) < n_hops:
                # nothing to track yet
                kind = AlignKind.INITIAL_ACCESS
            else:
                candidates = {
                    hop: top_candidates(meas, self.cfg.beams.n_bt) for hop, meas in last.items()
                }
        schedule = build_schedule(kind, relay, self.cfg.beams, candidates)
        self._align = _AlignmentRun(schedule=schedule)
        self.mode = ModeState(
            relay=relay,
            mode=Mode.ALIGNMENT,
            m_ba=0,
            m_dt=0,
            total_ba=schedule.total_slots,
            total_dt=self.cfg.beams.m_dt,
            align_kind=kind,
        )

    def _alignment_slot(self) -> bool:
        channels = self._require_channels()
        if self._align is None:
            raise RuntimeError("alignment slot without a sweep schedule")
        ms = self.mode
        ms.m_ba += 1
        self.feedback.record_alignment()
        hops = self.topology.link_hops(ms.relay)
        for hop_idx, pairs in self._align.schedule.pairs_at(ms.m_ba).items():
            table = channels.hop(hops[hop_idx]).table(self.snr)
            bucket = self._align.measurements.setdefault(hop_idx, {})
            for i_f, i_w in pairs:
                bucket[(i_f, i_w)] = float(table[i_w - 1, i_f - 1])
        if ms.m_ba < ms.total_ba:
            return False

        relay = ms.relay
        for hop_idx, meas in self._align.measurements.items():
            pair, _ = select_best(meas)
            self._hop_beams[relay][hop_idx] = pair
            if ms.align_kind is AlignKind.INITIAL_ACCESS:
                self._last_sweep[relay][hop_idx] = dict(meas)
        i_tx, i_rx = self._hop_beams[relay][0]
        link = self.net.links[relay]
        self.net.links[relay] = LinkVector(i_tx=i_tx, i_rx=i_rx, s_last=link.s_last)
        self.mode = ModeState(
            relay=relay,
            mode=Mode.DATA,
            m_ba=0,
            m_dt=0,
            total_ba=ms.total_ba,
            total_dt=ms.total_dt,
            align_kind=ms.align_kind,
        )
        self._align = None
        logger.debug("Slot %d: aligned link %d -> beams %s", self.slot, relay, self._hop_beams[relay])
        return True

    # ── Data ───────────────────────────────────────────────────────

    def _measure_link(self, relay: int) -> tuple[float, bool]:
        """Fed-back rate of the selected link and whether any hop is blocked."""
        channels = self._require_channels()
        snr_eff = effective_snr(self.snr, self.feedback.mmse(self.snr))
        rates: list[float] = []
        blocked = False
        for hop_idx, hop in enumerate(self.topology.link_hops(relay)):
            ch = channels.hop(hop)
            if ch.blocked:
                # decode failure feeds back zero
                blocked = True
                rates.append(0.0)
                continue
            i_f, i_w = self._hop_beams[relay][hop_idx]
            rates.append(measured_se(i_f, i_w, ch.gains(), snr_eff))
        if len(rates) == 1:
            return rates[0], blocked
        return two_hop_se(rates[0], rates[1]), blocked

    # ── Genie ──────────────────────────────────────────────────────

    def link_best_se(self, relay: int) -> float:
        """Best-beam achievable rate of *relay*'s link on the current channel."""
        channels = self._require_channels()
        rates = [channels.hop(hop).best_se(self.snr) for hop in self.topology.link_hops(relay)]
        if len(rates) == 1:
            return rates[0]
        return two_hop_se(rates[0], rates[1])

    def genie_reward(self) -> float:
        """Max over all links of the best-beam achievable rate, no overhead."""
        return max(self.link_best_se(n) for n in range(self.topology.n_links))

    def direct_reward(self) -> float:
        return self.link_best_se(0)

    def advance(self) -> None:
        """Move every channel one slot forward without taking a decision."""
        self._require_channels().advance()
        self.slot += 1

    # ── Step ───────────────────────────────────────────────────────

    def step(self, action: ThresholdAction) -> EnvStep:
        """Advance one slot under thresholds *action*."""
        self._require_channels()
        info = StepInfo(slot=self.slot + 1, relay=self.mode.relay, mode=self.mode.mode)
        if self.record_genie:
            info.genie = self.genie_reward()

        measured = 0.0
        if self.mode.mode is Mode.ALIGNMENT:
            info.finalized = self._alignment_slot()
        else:
            measured = self._data_slot(action, info)

        self.advance()
        return EnvStep(
            net=self.net.snapshot(),
            mode=copy.copy(self.mode),
            reward=measured,
            measured=measured,
            info=info,
        )

    def _data_slot(self, action: ThresholdAction, info: StepInfo) -> float:
        ms = self.mode
        ms.m_dt += 1
        self.feedback.record_data(self.cfg.beams.pilot_density)
        measured, info.blocked = self._measure_link(ms.relay)
        self.feedback.reset()
        link = self.net.links[ms.relay]
        self.net.links[ms.relay] = LinkVector(i_tx=link.i_tx, i_rx=link.i_rx, s_last=measured)
        if ms.m_dt < ms.total_dt:
            return measured

        behavior = classify_behavior(measured, action)
        info.behavior = behavior
        if behavior is Behavior.PESSIMISTIC:
            target = self.net.best_other(ms.relay)
            info.switched = target != ms.relay
            logger.debug("Slot %d: pessimistic, link %d -> %d", info.slot, ms.relay, target)
            self._start_alignment(target, AlignKind.INITIAL_ACCESS)
        elif behavior is Behavior.OPPORTUNISTIC:
            self._start_alignment(ms.relay, AlignKind.BEAM_TRACKING)
        else:
            ms.m_dt = 0
        return measured
