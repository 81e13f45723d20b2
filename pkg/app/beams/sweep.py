"""
Beam sweeping: alignment durations, SS-burst scheduling and beam selection.

Beam pairs are swept in lexicographic (i_F, i_W) order, ``N_SS`` pairs per
SS burst, each burst occupying ``M_SS`` consecutive slots.  An indirect
link sweeps its two hops back to back: transmitter -> relay first, then
relay -> receiver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from app.beams.rate import codebook_gains, se_table
from app.core.config import BeamParams
from app.core.state import AlignKind

BeamPair = tuple[int, int]


def sweep_slot_index(i_f: int, i_w: int, n_c: int, n_ss: int, n_outer: int | None = None) -> int:
    """
    1-based SS burst in which pair (i_F, i_W) is measured:
    ``ceil((N_c (i_F - 1) + i_W) / N_SS)`` where ``N_c`` is the size of the
    inner (receive-side) codebook.

    *n_outer* bounds ``i_F`` and defaults to ``n_c``.
    """
    n_outer = n_c if n_outer is None else n_outer
    if not (1 <= i_f <= n_outer and 1 <= i_w <= n_c):
        raise ValueError(f"Beam pair ({i_f}, {i_w}) outside {n_outer}x{n_c} codebooks")
    if n_ss < 1:
        raise ValueError("n_ss must be >= 1")
    return math.ceil((n_c * (i_f - 1) + i_w) / n_ss)


def _bursts(n_pairs: int, n_ss: int) -> int:
    return math.ceil(n_pairs / n_ss)


def alignment_duration(
    kind: AlignKind,
    indirect: bool,
    n_f: int,
    n_w: int,
    n_g: int,
    n_bt: int,
    n_ss: int,
    m_ss: int,
) -> int:
    """
    Slots needed to align a link.

    ==========  ===========================================================
    IA direct   M_SS ceil(|F||W| / N_SS)
    BT direct   M_SS ceil(N_BT / N_SS)
    IA relay    M_SS ceil(|F||G| / N_SS) + M_SS ceil(|G||W| / N_SS)
    BT relay    2 M_SS ceil(N_BT / N_SS)
    ==========  ===========================================================
    """
    if min(n_f, n_w, n_g, n_bt, n_ss, m_ss) < 1:
        raise ValueError("all sizes must be >= 1")
    kind = AlignKind(kind)
    if kind is AlignKind.INITIAL_ACCESS:
        if indirect:
            return m_ss * _bursts(n_f * n_g, n_ss) + m_ss * _bursts(n_g * n_w, n_ss)
        return m_ss * _bursts(n_f * n_w, n_ss)
    per_hop = m_ss * _bursts(n_bt, n_ss)
    return 2 * per_hop if indirect else per_hop


# ── Schedules ──────────────────────────────────────────────────────

@dataclass(frozen=True)
class HopSweep:
    """Pairs swept on one hop, with the 1-based alignment slot of each."""

    hop: int
    pairs: tuple[BeamPair, ...]
    slots: tuple[int, ...]
    duration: int


@dataclass(frozen=True)
class SweepSchedule:
    kind: AlignKind
    relay: int
    total_slots: int
    hops: tuple[HopSweep, ...] = field(default_factory=tuple)

    @property
    def indirect(self) -> bool:
        return self.relay > 0

    @property
    def pairs(self) -> list[BeamPair]:
        return [p for hop in self.hops for p in hop.pairs]

    def pairs_at(self, slot: int) -> dict[int, list[BeamPair]]:
        """Pairs measured in alignment slot *slot* (1-based), keyed by hop."""
        out: dict[int, list[BeamPair]] = {}
        for hop in self.hops:
            chosen = [p for p, s in zip(hop.pairs, hop.slots) if s == slot]
            if chosen:
                out[hop.hop] = chosen
        return out


def _hop_sweep(
    hop: int, pairs: Sequence[BeamPair], offset: int, duration: int, n_ss: int, m_ss: int
) -> HopSweep:
    # the sweep order is a single row of len(pairs) positions
    n = len(pairs)
    slots = tuple(
        offset + (sweep_slot_index(1, j, n, n_ss, n_outer=1) - 1) * m_ss + 1
        for j in range(1, n + 1)
    )
    return HopSweep(hop=hop, pairs=tuple(pairs), slots=slots, duration=duration)


def build_schedule(
    kind: AlignKind,
    relay: int,
    beams: BeamParams,
    candidates: Mapping[int, Sequence[BeamPair]] | None = None,
) -> SweepSchedule:
    """
    Sweep schedule for aligning link *relay* (0 = direct).

    Hops are numbered 0 (transmitter side) and 1 (relay -> receiver).
    Initial access sweeps full codebooks; beam tracking sweeps the
    candidate pairs given per hop, at most ``N_BT`` of them.  Beam tracking
    without candidates for some hop raises ValueError.
    """
    kind = AlignKind(kind)
    indirect = relay > 0
    if indirect:
        sizes = [
            (beams.codebook_tx, beams.codebook_relay),
            (beams.codebook_relay, beams.codebook_rx),
        ]
    else:
        sizes = [(beams.codebook_tx, beams.codebook_rx)]

    hops: list[HopSweep] = []
    offset = 0
    for hop, (n_out, n_in) in enumerate(sizes):
        if kind is AlignKind.INITIAL_ACCESS:
            pairs = [(i, j) for i in range(1, n_out + 1) for j in range(1, n_in + 1)]
            duration = beams.m_ss * _bursts(n_out * n_in, beams.n_ss)
        else:
            pool = list((candidates or {}).get(hop, ()))
            if not pool:
                raise ValueError(f"beam tracking needs candidate pairs for hop {hop}")
            pairs = pool[: beams.n_bt]
            duration = beams.m_ss * _bursts(beams.n_bt, beams.n_ss)
        hops.append(_hop_sweep(hop, pairs, offset, duration, beams.n_ss, beams.m_ss))
        offset += duration

    return SweepSchedule(kind=kind, relay=relay, total_slots=offset, hops=tuple(hops))


# ── Selection ──────────────────────────────────────────────────────

def select_best(measurements: Mapping[BeamPair, float]) -> tuple[BeamPair, float]:
    """Argmax pair; ties resolve to the lexicographically smallest pair."""
    if not measurements:
        raise ValueError("no measurements to select from")
    best = min(measurements, key=lambda p: (-measurements[p], p))
    return best, float(measurements[best])


def top_candidates(measurements: Mapping[BeamPair, float], n_bt: int) -> list[BeamPair]:
    """The *n_bt* best pairs, best first, ties to the smallest pair."""
    ranked = sorted(measurements, key=lambda p: (-measurements[p], p))
    return ranked[:n_bt]


def best_beam_pair(
    codebook_tx: np.ndarray,
    codebook_rx: np.ndarray,
    channel_at: Callable[[int], np.ndarray],
    sweep_end: int,
    total_slots: int,
    n_ss: int,
    snr: float,
    m_ss: int = 1,
) -> tuple[int, int, float]:
    """
    Beam pair selected by an exhaustive sweep that finishes at slot
    *sweep_end*.

    Pair (i_F, i_W) is measured on ``channel_at(sweep_end - total_slots +
    slot)`` where ``slot`` is its position in the sweep; ``channel_at``
    returns the (K, N_RX, N_TX) channel stack of a slot.  Returns the
    argmax pair and its spectral efficiency.
    """
    n_f, n_w = codebook_tx.shape[0], codebook_rx.shape[0]
    pairs = [(i, j) for i in range(1, n_f + 1) for j in range(1, n_w + 1)]
    sweep = _hop_sweep(0, pairs, 0, total_slots, n_ss, m_ss)
    if sweep.slots and sweep.slots[-1] > total_slots:
        raise ValueError("schedule does not cover every beam pair")

    tables: dict[int, np.ndarray] = {}
    measurements: dict[BeamPair, float] = {}
    for (i_f, i_w), slot in zip(sweep.pairs, sweep.slots):
        m = sweep_end - total_slots + slot
        if m not in tables:
            tables[m] = se_table(codebook_gains(channel_at(m), codebook_tx, codebook_rx), snr)
        measurements[(i_f, i_w)] = float(tables[m][i_w - 1, i_f - 1])

    (i_f, i_w), se = select_best(measurements)
    return i_f, i_w, se
