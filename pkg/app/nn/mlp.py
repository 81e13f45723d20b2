"""
Dense feedforward networks with hand-written reverse-mode gradients.

Weights are stored row-major as ``(out_dim, in_dim)`` so a layer computes
``act(W x + b)``.  ``forward`` accepts a single input vector or a batch
``(B, in_dim)``; gradients from a batch are summed over its rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ACTIVATIONS = ("tanh", "relu", "linear")


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    return z


def _activation_grad(z: np.ndarray, y: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return 1.0 - y * y
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    return np.ones_like(z)


# ── Parameters ─────────────────────────────────────────────────────

@dataclass
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "linear"

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation {self.activation!r}. Known: {ACTIVATIONS}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"Layer shapes do not match: weights {self.weights.shape}, bias {self.bias.shape}"
            )

    @property
    def in_dim(self) -> int:
        return int(self.weights.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weights.shape[0])


@dataclass
class MlpParams:
    layers: list[Layer] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for prev, nxt in zip(self.layers[:-1], self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(
                    f"Layer dimensions do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def copy(self) -> MlpParams:
        return MlpParams(
            [Layer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    def arrays(self) -> list[np.ndarray]:
        """Weights and biases interleaved, layer by layer."""
        return [a for l in self.layers for a in (l.weights, l.bias)]

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass
class GradientSet:
    """Per-layer gradients, shape-matched to an MlpParams."""

    d_weights: list[np.ndarray]
    d_bias: list[np.ndarray]

    @classmethod
    def zeros_like(cls, p: MlpParams) -> GradientSet:
        return cls(
            [np.zeros_like(l.weights) for l in p.layers],
            [np.zeros_like(l.bias) for l in p.layers],
        )

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.d_weights, self.d_bias) for a in pair]

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def matches(self, p: MlpParams) -> bool:
        return len(self.d_weights) == len(p.layers) and all(
            g.shape == l.weights.shape and b.shape == l.bias.shape
            for g, b, l in zip(self.d_weights, self.d_bias, p.layers)
        )


def init_mlp(
    sizes: Sequence[int],
    activations: Sequence[str],
    rng: np.random.Generator,
    final_scale: float | None = None,
) -> MlpParams:
    """
    Uniform ``+/- 1/sqrt(fan_in)`` initialisation; the last layer uses
    ``+/- final_scale`` when given.
    """
    if len(sizes) < 2 or len(activations) != len(sizes) - 1:
        raise ValueError("need len(sizes) - 1 activations for at least one layer")
    layers: list[Layer] = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        if final_scale is not None and i == len(sizes) - 2:
            bound = final_scale
        layers.append(
            Layer(
                weights=rng.uniform(-bound, bound, size=(fan_out, fan_in)),
                bias=rng.uniform(-bound, bound, size=fan_out),
                activation=activations[i],
            )
        )
    return MlpParams(layers)


# ── Forward / backward ─────────────────────────────────────────────

@dataclass
class ForwardCache:
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    post: list[np.ndarray]
    batched: bool


def forward(p: MlpParams, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Network output for *x* and the cache needed by :func:`backward`."""
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    h = x if batched else x.reshape(1, -1)
    if h.ndim != 2 or h.shape[1] != p.in_dim:
        raise ValueError(f"Input dimension {x.shape} does not match network input {p.in_dim}")
    inputs, pre, post = [], [], []
    for layer in p.layers:
        inputs.append(h)
        z = h @ layer.weights.T + layer.bias
        h = _activate(z, layer.activation)
        pre.append(z)
        post.append(h)
    y = h if batched else h[0]
    return y, ForwardCache(inputs=inputs, pre=pre, post=post, batched=batched)


def backward(
    p: MlpParams, cache: ForwardCache, dy: np.ndarray
) -> tuple[GradientSet, np.ndarray]:
    """Gradients of a scalar loss w.r.t. parameters and input, given dL/dy."""
    dy = np.asarray(dy, dtype=np.float64)
    g = dy if cache.batched else dy.reshape(1, -1)
    if g.shape != cache.post[-1].shape:
        raise ValueError(f"Upstream gradient {dy.shape} does not match output {cache.post[-1].shape}")
    if len(cache.pre) != len(p.layers):
        raise ValueError("cache does not come from this network")

    n = len(p.layers)
    d_weights: list[np.ndarray] = [np.empty(0)] * n
    d_bias: list[np.ndarray] = [np.empty(0)] * n
    for i in reversed(range(n)):
        layer = p.layers[i]
        dz = g * _activation_grad(cache.pre[i], cache.post[i], layer.activation)
        d_weights[i] = dz.T @ cache.inputs[i]
        d_bias[i] = dz.sum(axis=0)
        g = dz @ layer.weights
    dx = g if cache.batched else g[0]
    return GradientSet(d_weights, d_bias), dx


def predict(p: MlpParams, x: np.ndarray) -> np.ndarray:
    return forward(p, x)[0]


def soft_update(target: MlpParams, online: MlpParams, eta: float) -> MlpParams:
    """``eta * online + (1 - eta) * target``, elementwise."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if len(target.layers) != len(online.layers):
        raise ValueError("networks have different depths")
    layers = []
    for t, o in zip(target.layers, online.layers):
        if t.weights.shape != o.weights.shape:
            raise ValueError(f"Layer shapes differ: {t.weights.shape} vs {o.weights.shape}")
        layers.append(
            Layer(
                weights=eta * o.weights + (1.0 - eta) * t.weights,
                bias=eta * o.bias + (1.0 - eta) * t.bias,
                activation=t.activation,
            )
        )
    return MlpParams(layers)
