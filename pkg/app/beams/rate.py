"""
Spectral efficiency, MMSE-degraded beam measurements and two-hop combining.

Every rate in the simulator goes through :func:`se_table`, so achievable
and measured rates of the same beam pair are computed identically and
differ only in the SNR that is plugged in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_UNIT_TOL = 1e-9


def _check_unit(vec: np.ndarray, name: str) -> None:
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > _UNIT_TOL:
        raise ValueError(f"Beam {name} must have unit norm, got {norm:.12f}")


def codebook_gains(h_per_k: np.ndarray, cb_tx: np.ndarray, cb_rx: np.ndarray) -> np.ndarray:
    """``w_i^* H[k] f_j`` for all pairs, shape (K, |W|, |F|), from explicit matrices."""
    return np.einsum("wr,krt,ft->kwf", cb_rx.conj(), h_per_k, cb_tx)


def se_table(gains: np.ndarray, snr: float) -> np.ndarray:
    """
    Subcarrier-averaged spectral efficiency of every beam pair.

    *gains* has shape (K, |W|, |F|); the result has shape (|W|, |F|).
    """
    return np.mean(np.log2(1.0 + snr * np.abs(gains) ** 2), axis=0)


def spectral_efficiency(
    f: np.ndarray, w: np.ndarray, h_per_k: np.ndarray, snr_pre: float
) -> float:
    """
    (1/K) sum_k log2(1 + snr_pre |w^* H[k] f|^2) in bits/s/Hz.

    *h_per_k* is a (K, N_RX, N_TX) stack of channel matrices.
    """
    _check_unit(f, "f")
    _check_unit(w, "w")
    h_per_k = np.asarray(h_per_k)
    if h_per_k.ndim != 3 or h_per_k.shape[0] < 1:
        raise ValueError("h_per_k must be a non-empty (K, N_RX, N_TX) stack")
    gains = np.einsum("r,krt,t->k", w.conj(), h_per_k, f)
    return float(np.mean(np.log2(1.0 + snr_pre * np.abs(gains) ** 2)))


# ── Measurement error ──────────────────────────────────────────────

def mmse(beta: float, n_b: float, snr: float) -> float:
    """MMSE of the effective-channel estimate, 1 / (1 + beta * N_b * snr)."""
    return 1.0 / (1.0 + beta * n_b * snr)


def effective_snr(snr: float, mmse_value: float) -> float:
    """snr (1 - mmse) / (1 + snr * mmse)."""
    if not 0.0 <= mmse_value <= 1.0:
        raise ValueError(f"mmse must lie in [0, 1], got {mmse_value}")
    return snr * (1.0 - mmse_value) / (1.0 + snr * mmse_value)


def measured_se(i_f: int, i_w: int, gains: np.ndarray, snr_eff: float) -> float:
    """
    Beam measurement fed back by the receiver for the 1-based pair
    (*i_f*, *i_w*): the spectral efficiency with ``snr_eff`` in place of
    the true pre-beamforming SNR.
    """
    if snr_eff <= 0:
        return 0.0
    n_w, n_f = gains.shape[1], gains.shape[2]
    if not (1 <= i_f <= n_f and 1 <= i_w <= n_w):
        raise ValueError(f"Beam pair ({i_f}, {i_w}) outside codebooks {n_f}x{n_w}")
    return float(se_table(gains, snr_eff)[i_w - 1, i_f - 1])


def two_hop_se(s1: float, s2: float) -> float:
    """
    Decode-and-forward rate with optimal time sharing, s1 s2 / (s1 + s2).

    Evaluated in harmonic form, which is monotone in each argument under
    floating-point rounding.
    """
    if s1 < 0 or s2 < 0:
        raise ValueError("spectral efficiencies must be non-negative")
    if s1 == 0 or s2 == 0:
        return 0.0
    return 1.0 / (1.0 / s1 + 1.0 / s2)


# ── Pilot bookkeeping ──────────────────────────────────────────────

@dataclass
class FeedbackState:
    """
    Pilot accounting for the block since the last data frame.

    ``n_b`` counts OFDM frames and ``beta`` is the fraction of those
    frames spent on pilots.  Alignment frames are all pilots; data frames
    carry ``pilot_density`` pilots.
    """

    pilot_frames: float = 0.0
    n_frames: int = 0

    @property
    def n_b(self) -> int:
        return self.n_frames

    @property
    def beta(self) -> float:
        return self.pilot_frames / self.n_frames if self.n_frames else 0.0

    def record_alignment(self) -> None:
        self.pilot_frames += 1.0
        self.n_frames += 1

    def record_data(self, pilot_density: float) -> None:
        self.pilot_frames += pilot_density
        self.n_frames += 1

    def mmse(self, snr: float) -> float:
        return mmse(self.beta, self.n_b, snr)

    def reset(self) -> None:
        self.pilot_frames = 0.0
        self.n_frames = 0
