"""
Network checkpoints.

A checkpoint is a UTF-8 JSON document::

    {
      "format": "relaybeam-mlp",
      "version": 1,
      "layers": [
        {"in_dim": 9, "out_dim": 64, "activation": "tanh",
         "weights": [... out_dim * in_dim values, row-major ...],
         "bias": [... out_dim values ...]},
        ...
      ]
    }

Floats are written with ``repr`` precision, so a save/load round trip is
exact.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from app.core.errors import ConfigError
from app.nn.mlp import ACTIVATIONS, Layer, MlpParams

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "relaybeam-mlp"
CHECKPOINT_VERSION = 1


class LayerDoc(BaseModel):
    in_dim: int = Field(..., ge=1)
    out_dim: int = Field(..., ge=1)
    activation: str
    weights: list[float]
    bias: list[float]

    @model_validator(mode="after")
    def _check_sizes(self) -> LayerDoc:
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != self.in_dim * self.out_dim:
            raise ValueError(
                f"expected {self.in_dim * self.out_dim} weights, got {len(self.weights)}"
            )
        if len(self.bias) != self.out_dim:
            raise ValueError(f"expected {self.out_dim} biases, got {len(self.bias)}")
        return self


class CheckpointDoc(BaseModel):
    format: Literal["relaybeam-mlp"] = CHECKPOINT_FORMAT
    version: Literal[1] = CHECKPOINT_VERSION
    layers: list[LayerDoc] = Field(..., min_length=1)


def to_document(p: MlpParams) -> CheckpointDoc:
    return CheckpointDoc(
        layers=[
            LayerDoc(
                in_dim=l.in_dim,
                out_dim=l.out_dim,
                activation=l.activation,
                weights=l.weights.ravel(order="C").tolist(),
                bias=l.bias.tolist(),
            )
            for l in p.layers
        ]
    )


def from_document(doc: CheckpointDoc) -> MlpParams:
    return MlpParams(
        [
            Layer(
                weights=np.asarray(l.weights, dtype=np.float64).reshape(l.out_dim, l.in_dim),
                bias=np.asarray(l.bias, dtype=np.float64),
                activation=l.activation,
            )
            for l in doc.layers
        ]
    )


def save_mlp(p: MlpParams, path: str | Path) -> None:
    path = Path(path)
    path.write_text(to_document(p).model_dump_json(indent=1), encoding="utf-8")
    logger.info("Saved %d-layer network to %s", len(p.layers), path)


def load_mlp(path: str | Path) -> MlpParams:
    """
    Read a checkpoint written by :func:`save_mlp`.

    Raises ConfigError for documents of another format or version, or whose
    layer sizes do not chain.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        params = from_document(CheckpointDoc.model_validate(raw))
    except (json.JSONDecodeError, ValidationError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid network checkpoint: {exc}") from exc
    logger.info("Loaded %d-layer network from %s", len(params.layers), path)
    return params
