"""
Finite-difference verification of the analytic network gradients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.nn.mlp import MlpParams, backward, forward, init_mlp

logger = logging.getLogger(__name__)

_SKIP_BELOW = 1e-8


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    n_skipped: int

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error <= tol


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> tuple[np.ndarray, int]:
    """Elementwise relative error, dropping entries where both are negligible."""
    a, n = np.ravel(analytic), np.ravel(numeric)
    scale = np.maximum(np.abs(a), np.abs(n))
    keep = scale >= _SKIP_BELOW
    return np.abs(a - n)[keep] / scale[keep], int(np.count_nonzero(~keep))


def numeric_gradients(
    p: MlpParams, x: np.ndarray, upstream: np.ndarray, step: float = 1e-5
) -> list[np.ndarray]:
    """
    Fourth-order central differences of ``L = sum(upstream * forward(p, x))``
    with respect to every parameter array, in :meth:`MlpParams.arrays` order.

    All parameters of a layer are perturbed at once (one direction per
    parameter) and ``y(theta + a e) - y(theta - a e)`` is carried through
    the downstream layers as a difference, so two nearly equal network
    outputs are never subtracted.
    """
    _, cache = forward(p, x)
    upstream = np.asarray(upstream, dtype=np.float64).reshape(cache.post[-1].shape)
    grads: list[np.ndarray] = []
    for i, layer in enumerate(p.layers):
        h_in = cache.inputs[i]
        batch = h_in.shape[0]
        out_dim, in_dim = layer.weights.shape
        n_w = out_dim * in_dim

        # dz/dtheta for every weight (row-major) and then every bias
        dz = np.zeros((n_w + out_dim, batch, out_dim))
        rows, cols = np.divmod(np.arange(n_w), in_dim)
        dz[np.arange(n_w), :, rows] = h_in[:, cols].T
        dz[n_w + np.arange(out_dim), :, np.arange(out_dim)] = 1.0

        d1 = _output_difference(p, i, cache.pre[i], dz, step)
        d2 = _output_difference(p, i, cache.pre[i], dz, 2.0 * step)
        dl = np.einsum("pbo,bo->p", 8.0 * d1 - d2, upstream) / (12.0 * step)
        grads.append(dl[:n_w].reshape(out_dim, in_dim))
        grads.append(dl[n_w:])
    return grads


def _output_difference(
    p: MlpParams, start: int, z: np.ndarray, dz: np.ndarray, a: float
) -> np.ndarray:
    """``y(theta + a e) - y(theta - a e)`` for every direction ``e`` in *dz*."""
    z_hi, z_lo = z + a * dz, z - a * dz
    delta = 2.0 * a * dz
    for j in range(start, len(p.layers)):
        layer = p.layers[j]
        if j > start:
            z_hi = h_hi @ layer.weights.T + layer.bias
            z_lo = h_lo @ layer.weights.T + layer.bias
            delta = d_h @ layer.weights.T
        if layer.activation == "tanh":
            h_hi, h_lo = np.tanh(z_hi), np.tanh(z_lo)
            # tanh(u) - tanh(v) = sinh(u - v) / (cosh(u) cosh(v))
            d_h = np.sinh(delta) / (np.cosh(z_hi) * np.cosh(z_lo))
        elif layer.activation == "relu":
            h_hi, h_lo = np.maximum(z_hi, 0.0), np.maximum(z_lo, 0.0)
            d_h = np.where((z_hi > 0.0) & (z_lo > 0.0), delta, h_hi - h_lo)
        else:
            h_hi, h_lo, d_h = z_hi, z_lo, delta
    return d_h


def check_network(
    p: MlpParams, x: np.ndarray, rng: np.random.Generator, step: float = 1e-5
) -> GradCheckReport:
    """Compare :func:`backward` against central differences on *p* at *x*."""
    y, cache = forward(p, x)
    upstream = rng.normal(size=y.shape)
    analytic, _ = backward(p, cache, upstream)
    numeric = numeric_gradients(p, x, upstream, step)
    worst, checked, skipped = 0.0, 0, 0
    for a, n in zip(analytic.arrays(), numeric):
        errs, n_skip = relative_errors(a, n)
        skipped += n_skip
        checked += errs.size
        if errs.size:
            worst = max(worst, float(errs.max()))
    return GradCheckReport(max_rel_error=worst, n_checked=checked, n_skipped=skipped)


def run_gradcheck(
    state_dim: int,
    hidden: Sequence[int] = (64, 64),
    n_nets: int = 20,
    batch: int = 4,
    seed: int = 0,
) -> dict[str, GradCheckReport]:
    """
    Gradient check on *n_nets* random actor and critic networks of the
    production architecture.  Returns the worst report per network kind.
    """
    if n_nets < 1:
        raise ValueError("n_nets must be >= 1")
    rng = np.random.default_rng(seed)
    kinds = {
        "actor": ([state_dim, *hidden, 2], ["tanh"] * len(hidden) + ["tanh"]),
        "critic": ([state_dim + 2, *hidden, 1], ["tanh"] * len(hidden) + ["linear"]),
    }
    out: dict[str, GradCheckReport] = {}
    for name, (sizes, acts) in kinds.items():
        reports = [
            check_network(init_mlp(sizes, acts, rng), rng.normal(size=(batch, sizes[0])), rng)
            for _ in range(n_nets)
        ]
        worst = max(reports, key=lambda r: r.max_rel_error)
        out[name] = worst
        logger.info("Gradient check %s: max relative error %.3e", name, worst.max_rel_error)
    return out
