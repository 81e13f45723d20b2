"""
Decision-state containers for the relay environment.

NetState holds one LinkVector per candidate link (index 0 is the direct
link, index n >= 1 the two-hop link through relay n).  ModeState carries
the bookkeeping of the threshold heuristic: current relay, current mode
and the slot counters of the running alignment / transmission.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from enum import Enum, IntEnum


class Mode(IntEnum):
    ALIGNMENT = 0
    DATA = 1


class AlignKind(str, Enum):
    INITIAL_ACCESS = "IA"
    BEAM_TRACKING = "BT"


class Behavior(str, Enum):
    OPTIMISTIC = "optimistic"
    OPPORTUNISTIC = "opportunistic"
    PESSIMISTIC = "pessimistic"


# ── Link vectors ───────────────────────────────────────────────────

@dataclass
class LinkVector:
    """
    Best beam indices (1-based) and the last measured spectral efficiency.

    For the direct link ``i_rx`` is the receiver beam; for relay links it is
    the relay beam of the first hop and ``s_last`` is the end-to-end
    two-hop measurement.
    """

    i_tx: int = 1
    i_rx: int = 1
    s_last: float = 0.0

    def __post_init__(self) -> None:
        if self.i_tx < 1 or self.i_rx < 1:
            raise ValueError("beam indices are 1-based")
        if self.s_last < 0:
            raise ValueError("s_last must be non-negative")


@dataclass
class NetState:
    links: list[LinkVector]

    @classmethod
    def initial(cls, n_relays: int) -> NetState:
        """All link vectors set to (1, 1, 0)."""
        return cls(links=[LinkVector() for _ in range(n_relays + 1)])

    @property
    def n_relays(self) -> int:
        return len(self.links) - 1

    def snapshot(self) -> NetState:
        return copy.deepcopy(self)

    def best_other(self, current: int) -> int:
        """
        Index of the link with the largest stale measurement, excluding
        *current*.  Ties resolve to the smallest index.
        """
        candidates = [i for i in range(len(self.links)) if i != current]
        if not candidates:
            return current
        return max(candidates, key=lambda i: (self.links[i].s_last, -i))

    def __len__(self) -> int:
        return len(self.links)


# ── Mode bookkeeping ───────────────────────────────────────────────

@dataclass
class ModeState:
    relay: int = 0
    mode: Mode = Mode.ALIGNMENT
    m_ba: int = 0
    m_dt: int = 0
    total_ba: int = 1
    total_dt: int = 1
    align_kind: AlignKind = AlignKind.INITIAL_ACCESS

    def __post_init__(self) -> None:
        if not 0 <= self.m_ba <= self.total_ba:
            raise ValueError("m_ba out of range")
        if not 0 <= self.m_dt <= self.total_dt:
            raise ValueError("m_dt out of range")


# ── Actions ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ThresholdAction:
    """The (tau_relay, tau_mode) pair, in bits/s/Hz."""

    tau_relay: float
    tau_mode: float

    def __post_init__(self) -> None:
        if self.tau_relay < 0 or self.tau_mode < 0:
            raise ValueError("thresholds must be non-negative")
        if math.isnan(self.tau_relay) or math.isnan(self.tau_mode):
            raise ValueError("thresholds must not be NaN")
        if self.tau_relay > self.tau_mode:
            raise ValueError(
                f"tau_relay ({self.tau_relay}) must not exceed tau_mode ({self.tau_mode})"
            )


@dataclass
class StepInfo:
    """Per-slot diagnostics returned by the environment step."""

    slot: int
    relay: int
    mode: Mode
    behavior: Behavior | None = None
    switched: bool = False
    finalized: bool = False
    blocked: bool = False
    genie: float | None = None
