"""
Geometric multipath channel with Gauss-Markov drift and Markov blockage.

A PathSet is the full propagation state of one hop: its paths (gain,
angles, delay, blockage coefficient) and the two-state blockage chain.
All operations are pure: they return new objects and draw randomness only
from the generator passed in.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from app.channel.arrays import PulseShape, array_responses, raised_cosine
from app.core.config import ChannelParams
from app.core.errors import DegenerateChainError


class BlockState(str, Enum):
    UNBLOCKED = "unblocked"
    BLOCKED = "blocked"


def wrap_angle(phi: float | np.ndarray) -> np.ndarray:
    """Fold an angle into [0, pi] by reflection at the interval ends."""
    y = np.mod(phi, 2.0 * np.pi)
    return np.where(y > np.pi, 2.0 * np.pi - y, y)


# ── Domain types ───────────────────────────────────────────────────

@dataclass(frozen=True)
class Path:
    alpha: complex
    phi_a: float
    phi_d: float
    tau: float = 0.0
    c_bl: int = 1

    def __post_init__(self) -> None:
        if not (0.0 <= self.phi_a <= np.pi and 0.0 <= self.phi_d <= np.pi):
            raise ValueError("path angles must lie in [0, pi]")
        if self.c_bl not in (0, 1):
            raise ValueError("c_bl must be 0 or 1")
        if self.tau < 0:
            raise ValueError("path delay must be non-negative")


@dataclass(frozen=True)
class PathSet:
    paths: tuple[Path, ...] = ()
    block_state: BlockState = BlockState.UNBLOCKED
    block_timer: int = 0

    def __post_init__(self) -> None:
        if self.block_timer < 0:
            raise ValueError("block_timer must be non-negative")

    @property
    def is_blocked(self) -> bool:
        """True when no path currently carries energy."""
        if self.block_state is BlockState.BLOCKED:
            return True
        return all(p.c_bl == 0 for p in self.paths)

    def __len__(self) -> int:
        return len(self.paths)


# ── Blockage chain ─────────────────────────────────────────────────

def steady_state(p_ub: float, p_bu: float) -> tuple[float, float]:
    """
    Steady-state distribution ``(q_u, q_b)`` of the two-state chain with
    transition probabilities unblocked->blocked ``p_ub`` and
    blocked->unblocked ``p_bu``.
    """
    total = p_ub + p_bu
    if total <= 0:
        raise DegenerateChainError(
            "Both transition probabilities are zero; the chain has no unique steady state."
        )
    return p_bu / total, p_ub / total


def step_blockage(ps: PathSet, params: ChannelParams, rng: np.random.Generator) -> PathSet:
    """
    Advance the blockage chain by one slot.

    ``block_timer`` counts the slots left in the current epoch.  When it
    runs out, the next state is drawn and held for exactly ``n_bl`` slots;
    every path's ``c_bl`` follows the state.
    """
    timer = ps.block_timer - 1 if ps.block_timer > 0 else 0
    if timer > 0:
        return replace(ps, block_timer=timer)

    u = rng.random()
    if ps.block_state is BlockState.UNBLOCKED:
        state = BlockState.BLOCKED if u < params.p_ub else BlockState.UNBLOCKED
    else:
        state = BlockState.UNBLOCKED if u < params.p_bu else BlockState.BLOCKED
    c_bl = 0 if state is BlockState.BLOCKED else 1
    paths = tuple(replace(p, c_bl=c_bl) for p in ps.paths)
    return PathSet(paths=paths, block_state=state, block_timer=params.n_bl)


# ── Path evolution ─────────────────────────────────────────────────

def evolve_paths(ps: PathSet, params: ChannelParams, rng: np.random.Generator) -> PathSet:
    """
    First-order Gauss-Markov step: additive complex Gaussian noise on each
    gain (per-component std ``sigma_p``) and Gaussian noise on both angles
    (std ``sigma_a``), folded back into [0, pi].  Delays are unchanged.
    """
    n = len(ps.paths)
    if n == 0:
        return ps
    gain_noise = rng.normal(0.0, params.sigma_p, size=(n, 2))
    angle_noise = rng.normal(0.0, params.sigma_a, size=(n, 2))
    paths = tuple(
        replace(
            p,
            alpha=p.alpha + complex(gain_noise[i, 0], gain_noise[i, 1]),
            phi_a=float(wrap_angle(p.phi_a + angle_noise[i, 0])),
            phi_d=float(wrap_angle(p.phi_d + angle_noise[i, 1])),
        )
        for i, p in enumerate(ps.paths)
    )
    return replace(ps, paths=paths)


def draw_pathset(
    params: ChannelParams, rng: np.random.Generator, n_paths: int = 1
) -> PathSet:
    """
    Fresh hop state: unit-variance complex Gaussian gains, uniform angles,
    zero delay, blockage state drawn from the steady state with a uniform
    residual epoch length.
    """
    alphas = (rng.normal(size=n_paths) + 1j * rng.normal(size=n_paths)) / np.sqrt(2.0)
    angles = rng.uniform(0.0, np.pi, size=(n_paths, 2))
    try:
        _, q_b = steady_state(params.p_ub, params.p_bu)
    except DegenerateChainError:
        q_b = 0.0
    state = BlockState.BLOCKED if rng.random() < q_b else BlockState.UNBLOCKED
    timer = int(rng.integers(1, params.n_bl + 1))
    c_bl = 0 if state is BlockState.BLOCKED else 1
    paths = tuple(
        Path(
            alpha=complex(alphas[i]),
            phi_a=float(angles[i, 0]),
            phi_d=float(angles[i, 1]),
            tau=0.0,
            c_bl=c_bl,
        )
        for i in range(n_paths)
    )
    return PathSet(paths=paths, block_state=state, block_timer=timer)


# ── Channel realisation ────────────────────────────────────────────

def _default_pulse(params: ChannelParams) -> PulseShape:
    return raised_cosine(params.symbol_period, params.rolloff)


def frequency_response(
    ps: PathSet, params: ChannelParams, pulse: PulseShape | None = None
) -> np.ndarray:
    """
    Per-path scalar response over subcarriers, shape (L, K):

        h_l[k] = c_l * alpha_l * sum_d p(d T_s - tau_l) exp(-j 2 pi k d / K),  k = 1..K
    """
    pulse = pulse or _default_pulse(params)
    n_paths = len(ps.paths)
    big_k = params.n_subcarriers
    if n_paths == 0:
        return np.zeros((0, big_k), dtype=np.complex128)
    d = np.arange(params.n_taps)
    k = np.arange(1, big_k + 1)
    kernel = np.exp(-2j * np.pi * np.outer(d, k) / big_k)  # (N_d, K)
    taus = np.array([p.tau for p in ps.paths])
    taps = pulse(d[None, :] * params.symbol_period - taus[:, None])  # (L, N_d)
    weights = np.array([p.c_bl * p.alpha for p in ps.paths], dtype=np.complex128)
    return weights[:, None] * (taps @ kernel)


def channel_matrix(
    ps: PathSet, k: int, params: ChannelParams, pulse: PulseShape | None = None
) -> np.ndarray:
    """N_RX x N_TX channel matrix at subcarrier *k* (1-based)."""
    if not 1 <= k <= params.n_subcarriers:
        raise ValueError(f"Subcarrier index {k} outside 1..{params.n_subcarriers}")
    if not ps.paths:
        return np.zeros((params.n_rx, params.n_tx), dtype=np.complex128)
    h = frequency_response(ps, params, pulse)[:, k - 1]
    a_r = array_responses([p.phi_a for p in ps.paths], params.n_rx)
    a_t = array_responses([p.phi_d for p in ps.paths], params.n_tx)
    return (a_r * h[None, :]) @ a_t.conj().T


def channel_matrices(
    ps: PathSet, params: ChannelParams, pulse: PulseShape | None = None
) -> np.ndarray:
    """All subcarriers at once, shape (K, N_RX, N_TX)."""
    if not ps.paths:
        return np.zeros(
            (params.n_subcarriers, params.n_rx, params.n_tx), dtype=np.complex128
        )
    h = frequency_response(ps, params, pulse)
    a_r = array_responses([p.phi_a for p in ps.paths], params.n_rx)
    a_t = array_responses([p.phi_d for p in ps.paths], params.n_tx)
    return np.einsum("lk,rl,tl->krt", h, a_r, a_t.conj())


def beamspace_gains(
    ps: PathSet,
    params: ChannelParams,
    cb_tx: np.ndarray,
    cb_rx: np.ndarray,
    pulse: PulseShape | None = None,
) -> np.ndarray:
    """
    Effective scalar channel ``w_i^* H[k] f_j`` for every subcarrier and
    codebook pair, shape (K, |W|, |F|), using the rank-one structure of
    each path instead of materialising H.
    """
    n_w, n_f = cb_rx.shape[0], cb_tx.shape[0]
    if not ps.paths:
        return np.zeros((params.n_subcarriers, n_w, n_f), dtype=np.complex128)
    h = frequency_response(ps, params, pulse)
    a_r = array_responses([p.phi_a for p in ps.paths], params.n_rx)
    a_t = array_responses([p.phi_d for p in ps.paths], params.n_tx)
    rx_proj = cb_rx.conj() @ a_r  # (|W|, L)
    tx_proj = a_t.conj().T @ cb_tx.T  # (L, |F|)
    return np.einsum("lk,wl,lf->kwf", h, rx_proj, tx_proj)
