"""
Uniform linear array responses, angular codebooks and the pulse shape.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

PulseShape = Callable[[np.ndarray], np.ndarray]


def array_response(phi: float, n: int) -> np.ndarray:
    """
    Half-wavelength ULA response

        a(phi)[i] = exp(-j * i * pi * cos(phi)) / sqrt(N),   i = 0..N-1

    The returned vector has unit 2-norm.
    """
    if n < 1:
        raise ValueError(f"Antenna count must be >= 1, got {n}")
    idx = np.arange(n)
    return np.exp(-1j * np.pi * idx * np.cos(phi)) / np.sqrt(n)


def array_responses(phis: np.ndarray, n: int) -> np.ndarray:
    """Column-stacked responses, shape (n, len(phis))."""
    if n < 1:
        raise ValueError(f"Antenna count must be >= 1, got {n}")
    phis = np.asarray(phis, dtype=np.float64).reshape(1, -1)
    idx = np.arange(n).reshape(-1, 1)
    return np.exp(-1j * np.pi * idx * np.cos(phis)) / np.sqrt(n)


def build_codebook(n_ant: int, n_c: int) -> np.ndarray:
    """
    Codebook partitioning the angular domain [0, pi].

    Returns an ``(n_c, n_ant)`` array whose row ``i`` is
    ``a(pi * i / n_ant)``; row ``i`` corresponds to the 1-based beam index
    ``i + 1`` used everywhere else.
    """
    if n_c < 1:
        raise ValueError(f"Codebook size must be >= 1, got {n_c}")
    angles = np.pi * np.arange(n_c) / n_ant
    return array_responses(angles, n_ant).T.copy()


def raised_cosine(symbol_period: float, rolloff: float = 0.4) -> PulseShape:
    """
    Raised-cosine pulse p(t) with p(0) = 1 and zeros at non-zero multiples
    of the symbol period.
    """

    def pulse(t: np.ndarray) -> np.ndarray:
        x = np.asarray(t, dtype=np.float64) / symbol_period
        base = np.sinc(x)
        if rolloff == 0:
            return base
        denom = 1.0 - (2.0 * rolloff * x) ** 2
        singular = np.isclose(denom, 0.0)
        safe = np.where(singular, 1.0, denom)
        shaped = base * np.cos(np.pi * rolloff * x) / safe
        limit = (np.pi / 4.0) * np.sinc(1.0 / (2.0 * rolloff))
        return np.where(singular, limit, shaped)

    return pulse
