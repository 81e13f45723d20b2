"""
Adaptive-moment (Adam) updates for MlpParams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.core.errors import TrainingDivergenceError
from app.nn.mlp import GradientSet, Layer, MlpParams


@dataclass
class AdamState:
    m: GradientSet
    v: GradientSet
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, p: MlpParams, **kwargs: float) -> AdamState:
        return cls(m=GradientSet.zeros_like(p), v=GradientSet.zeros_like(p), **kwargs)


def adam_step(p: MlpParams, g: GradientSet, state: AdamState, lr: float) -> MlpParams:
    """
    One bias-corrected Adam step.  *state* is updated in place; the
    returned parameters are new arrays.

    Raises
    ------
    TrainingDivergenceError
        If the gradient or the updated parameters are not finite.
    """
    if not g.matches(p) or not state.m.matches(p):
        raise ValueError("gradient / optimiser state shapes do not match the network")
    if not g.is_finite():
        raise TrainingDivergenceError("non-finite gradient in optimiser step")

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t

    def update(param: np.ndarray, grad: np.ndarray, m: np.ndarray, v: np.ndarray) -> np.ndarray:
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        return param - lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)

    layers = []
    for i, layer in enumerate(p.layers):
        layers.append(
            Layer(
                weights=update(layer.weights, g.d_weights[i], state.m.d_weights[i], state.v.d_weights[i]),
                bias=update(layer.bias, g.d_bias[i], state.m.d_bias[i], state.v.d_bias[i]),
                activation=layer.activation,
            )
        )
    out = MlpParams(layers)
    if not out.is_finite():
        raise TrainingDivergenceError("parameters became non-finite")
    return out
