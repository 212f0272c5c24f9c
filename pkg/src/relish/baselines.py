"""Pooled baseline heads: linear probe and a width-matched 2-layer MLP.

Both consume the masked mean of the token states, so any token-level
signal is diluted by 1/seq_len before they ever see it. The MLP hidden
width is chosen to match a reference trainable-value budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import diffcore as dc
from .diffcore import ParamStore, Tensor2
from .errors import ConfigError, EmptySupportError, MatchingError, ShapeError
from .rng import STREAM_LINEAR_INIT, STREAM_MLP_INIT, CounterRng
from .tokens import TokenStates


def masked_mean_pool(tokens: TokenStates) -> np.ndarray:
    """Arithmetic mean of the unmasked rows, as a 1 x dim vector."""
    keep = tokens.mask != 0
    if not keep.any():
        raise EmptySupportError("mean pool over an all-masked example")
    return tokens.states[keep].mean(axis=0, keepdims=True)


@dataclass(frozen=True)
class LinearHeadConfig:
    backbone_dim: int

    def __post_init__(self):
        if self.backbone_dim < 1:
            raise ConfigError("backbone_dim must be at least 1")


@dataclass(frozen=True)
class MlpHeadConfig:
    backbone_dim: int
    hidden: int
    dropout: float = 0.1

    def __post_init__(self):
        if self.backbone_dim < 1 or self.hidden < 1:
            raise ConfigError("backbone_dim and hidden must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout {self.dropout} outside [0, 1)")


def mlp_param_count(backbone_dim: int, hidden: int) -> int:
    """Trainable values of the 2-layer MLP head: h^2 + h(d+3) + 1."""
    return hidden * hidden + hidden * (backbone_dim + 3) + 1


def match_mlp_hidden(backbone_dim: int, target_params: int) -> int:
    """Hidden width as the multiple of 64 whose value count lands nearest
    target_params; exact ties go to the smaller width."""
    if backbone_dim < 1:
        raise MatchingError("backbone_dim must be at least 1")
    if target_params < backbone_dim + 5:
        raise MatchingError(
            f"target {target_params} below the smallest sensible head for d={backbone_dim}"
        )
    # count grows monotonically in h, so only the straddling pair matters
    lo = 64
    while mlp_param_count(backbone_dim, lo + 64) <= target_params:
        lo += 64
    hi = lo + 64
    diff_lo = abs(mlp_param_count(backbone_dim, lo) - target_params)
    diff_hi = abs(mlp_param_count(backbone_dim, hi) - target_params)
    return lo if diff_lo <= diff_hi else hi


def init_linear_params(config: LinearHeadConfig, seed: int, dtype=np.float32) -> ParamStore:
    rng = CounterRng(seed, STREAM_LINEAR_INIT)
    bound = math.sqrt(1.0 / config.backbone_dim)
    params = ParamStore()
    params.add("w", rng.uniform_matrix(config.backbone_dim, 1, -bound, bound), dtype=dtype)
    params.add("b", np.zeros((1, 1)), dtype=dtype)
    return params


def init_mlp_params(config: MlpHeadConfig, seed: int, dtype=np.float32) -> ParamStore:
    rng = CounterRng(seed, STREAM_MLP_INIT)
    d, h = config.backbone_dim, config.hidden
    params = ParamStore()
    for name, (rows, cols) in {
        "W1": (d, h),
        "b1": (1, h),
        "W2": (h, h),
        "b2": (1, h),
        "W3": (h, 1),
        "b3": (1, 1),
    }.items():
        if name.startswith("b"):
            params.add(name, np.zeros((rows, cols)), dtype=dtype)
        else:
            bound = math.sqrt(1.0 / rows)
            params.add(name, rng.uniform_matrix(rows, cols, -bound, bound), dtype=dtype)
    return params


def linear_head_forward(pooled: Tensor2, params: ParamStore) -> Tensor2:
    if pooled.cols != params["w"].rows:
        raise ShapeError(
            f"pooled dim {pooled.cols} does not match weight rows {params['w'].rows}"
        )
    return dc.add(dc.matmul(pooled, params["w"]), params["b"])


def mlp_head_forward(
    pooled: Tensor2,
    params: ParamStore,
    config: MlpHeadConfig,
    *,
    dropout_on: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor2:
    """Two RELU hidden layers with dropout after each, then affine scalar."""
    if pooled.cols != config.backbone_dim:
        raise ShapeError(
            f"pooled dim {pooled.cols} does not match backbone_dim {config.backbone_dim}"
        )
    if dropout_on and config.dropout > 0.0 and rng is None:
        raise ConfigError("dropout_on requires an rng for mask draws")
    u = dc.relu(dc.add(dc.matmul(pooled, params["W1"]), params["b1"]))
    if dropout_on and config.dropout > 0.0:
        u = dc.dropout(u, config.dropout, rng)
    u = dc.relu(dc.add(dc.matmul(u, params["W2"]), params["b2"]))
    if dropout_on and config.dropout > 0.0:
        u = dc.dropout(u, config.dropout, rng)
    return dc.add(dc.matmul(u, params["W3"]), params["b3"])
