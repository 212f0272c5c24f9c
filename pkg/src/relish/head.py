"""Iterative latent-state regression head over frozen token states.

A learned latent vector attends to projected token states through a
stack of residual refinement blocks and is finally mapped to one
standardized scalar. Targets are standardized by a normalizer fit on
the training split only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import diffcore as dc
from .diffcore import ParamStore, Tensor2
from .errors import ConfigError, DataError, ShapeError
from .rng import STREAM_HEAD_INIT, CounterRng
from .tokens import TokenStates


@dataclass(frozen=True)
class RelishConfig:
    """Shapes and rates of the refinement head.

    backbone_dim is the frozen model's hidden size; the head works in
    head_dim after one learned projection. ffn_hidden of None means
    4 x head_dim.
    """

    backbone_dim: int
    head_dim: int = 256
    num_heads: int = 8
    num_blocks: int = 3
    ffn_hidden: Optional[int] = None
    dropout: float = 0.1
    huber_delta: float = 1.0

    def __post_init__(self):
        if self.backbone_dim < 1:
            raise ConfigError("backbone_dim must be at least 1")
        if self.head_dim < 1 or self.num_heads < 1:
            raise ConfigError("head_dim and num_heads must be at least 1")
        if self.head_dim % self.num_heads != 0:
            raise ConfigError(
                f"head_dim {self.head_dim} not divisible by num_heads {self.num_heads}"
            )
        if self.num_blocks < 1:
            raise ConfigError("num_blocks must be at least 1")
        if self.ffn_width < 1:
            raise ConfigError("ffn_hidden must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout {self.dropout} outside [0, 1)")
        if self.huber_delta <= 0:
            raise ConfigError("huber_delta must be positive")

    @property
    def ffn_width(self) -> int:
        return 4 * self.head_dim if self.ffn_hidden is None else self.ffn_hidden

    @property
    def head_width(self) -> int:
        return self.head_dim // self.num_heads

    def as_dict(self) -> dict:
        return {
            "backbone_dim": self.backbone_dim,
            "head_dim": self.head_dim,
            "num_heads": self.num_heads,
            "num_blocks": self.num_blocks,
            "ffn_hidden": self.ffn_width,
            "dropout": self.dropout,
            "huber_delta": self.huber_delta,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RelishConfig":
        known = {
            "backbone_dim",
            "head_dim",
            "num_heads",
            "num_blocks",
            "ffn_hidden",
            "dropout",
            "huber_delta",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown head config keys: {sorted(unknown)}")
        if "backbone_dim" not in raw:
            raise ConfigError("head config requires backbone_dim")
        return cls(**raw)


def count_parameters(config: RelishConfig) -> int:
    """Closed-form trainable-value count for a config.

    Projection (with bias) + latent + per block
    [fused Q/K/V/O with biases, FFN with biases, two norms] + the
    scalar output map.
    """
    dh = config.head_dim
    f = config.ffn_width
    proj = config.backbone_dim * dh + dh
    latent = dh
    block = 4 * (dh * dh + dh) + (dh * f + f) + (f * dh + dh) + 4 * dh
    out = dh + 1
    return proj + latent + config.num_blocks * block + out


def param_shapes(config: RelishConfig) -> dict[str, tuple[int, int]]:
    """Parameter names and shapes in the canonical draw/serialization order."""
    dh, f = config.head_dim, config.ffn_width
    shapes: dict[str, tuple[int, int]] = {
        "proj.W": (config.backbone_dim, dh),
        "proj.b": (1, dh),
        "r0": (1, dh),
    }
    for i in range(config.num_blocks):
        p = f"block{i}"
        shapes[f"{p}.attn.Wq"] = (dh, dh)
        shapes[f"{p}.attn.bq"] = (1, dh)
        shapes[f"{p}.attn.Wk"] = (dh, dh)
        shapes[f"{p}.attn.bk"] = (1, dh)
        shapes[f"{p}.attn.Wv"] = (dh, dh)
        shapes[f"{p}.attn.bv"] = (1, dh)
        shapes[f"{p}.attn.Wo"] = (dh, dh)
        shapes[f"{p}.attn.bo"] = (1, dh)
        shapes[f"{p}.ln1.gamma"] = (1, dh)
        shapes[f"{p}.ln1.beta"] = (1, dh)
        shapes[f"{p}.ffn.W1"] = (dh, f)
        shapes[f"{p}.ffn.b1"] = (1, f)
        shapes[f"{p}.ffn.W2"] = (f, dh)
        shapes[f"{p}.ffn.b2"] = (1, dh)
        shapes[f"{p}.ln2.gamma"] = (1, dh)
        shapes[f"{p}.ln2.beta"] = (1, dh)
    shapes["out.w"] = (dh, 1)
    shapes["out.b"] = (1, 1)
    return shapes


# Parameter-init values are drawn in param_shapes order from one
# counter stream, so (config, seed) pins every bit.
_LATENT_SPREAD = 0.1


def init_params(config: RelishConfig, seed: int, dtype=np.float32) -> ParamStore:
    """Fresh parameters: weights uniform in +/- sqrt(1/fan_in) with
    fan_in = input dimension (rows), biases zero, norm scales one,
    latent uniform in +/- 0.1."""
    rng = CounterRng(seed, STREAM_HEAD_INIT)
    params = ParamStore()
    for name, (rows, cols) in param_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if name == "r0":
            value = rng.uniform_matrix(rows, cols, -_LATENT_SPREAD, _LATENT_SPREAD)
        elif leaf.startswith("b") or leaf == "beta":
            value = np.zeros((rows, cols))
        elif leaf == "gamma":
            value = np.ones((rows, cols))
        else:
            bound = math.sqrt(1.0 / rows)
            value = rng.uniform_matrix(rows, cols, -bound, bound)
        params.add(name, value, dtype=dtype)
    return params


def check_params(params: ParamStore, config: RelishConfig) -> None:
    expected = param_shapes(config)
    got = {name: t.value.shape for name, t in params.items()}
    if got != expected:
        missing = sorted(set(expected) - set(got))
        extra = sorted(set(got) - set(expected))
        wrong = sorted(n for n in set(got) & set(expected) if got[n] != expected[n])
        raise ShapeError(
            f"parameters do not match config (missing={missing}, extra={extra}, reshaped={wrong})"
        )


# ---------------------------------------------------------------------------
# forward pass


def project_tokens(tokens: TokenStates, params: ParamStore) -> Tensor2:
    """Token memory: states times the learned projection, plus bias.

    Masked rows are projected too; they are excluded later by the
    masked softmax, which gives them exactly zero attention.
    """
    w = params["proj.W"]
    if tokens.dim != w.rows:
        raise ShapeError(f"token dim {tokens.dim} does not match projection input {w.rows}")
    h = dc.constant(tokens.states, dtype=w.value.dtype)
    return dc.add(dc.matmul(h, w), params["proj.b"])


def _attend(
    latent: Tensor2,
    memory: Tensor2,
    mask: np.ndarray,
    params: ParamStore,
    prefix: str,
    config: RelishConfig,
) -> Tensor2:
    q = dc.add(dc.matmul(latent, params[f"{prefix}.Wq"]), params[f"{prefix}.bq"])
    k = dc.add(dc.matmul(memory, params[f"{prefix}.Wk"]), params[f"{prefix}.bk"])
    v = dc.add(dc.matmul(memory, params[f"{prefix}.Wv"]), params[f"{prefix}.bv"])
    width = config.head_width
    inv_scale = 1.0 / math.sqrt(width)
    heads = []
    for m in range(config.num_heads):
        lo, hi = m * width, (m + 1) * width
        scores = dc.scale(
            dc.matmul(dc.slice_cols(q, lo, hi), dc.transpose(dc.slice_cols(k, lo, hi))),
            inv_scale,
        )
        probs = dc.masked_softmax(scores, mask)
        heads.append(dc.matmul(probs, dc.slice_cols(v, lo, hi)))
    fused = heads[0] if len(heads) == 1 else dc.concat_cols(heads)
    return dc.add(dc.matmul(fused, params[f"{prefix}.Wo"]), params[f"{prefix}.bo"])


def refine_step(
    latent: Tensor2,
    memory: Tensor2,
    mask: np.ndarray,
    params: ParamStore,
    block: int,
    config: RelishConfig,
    *,
    dropout_on: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor2:
    """One residual block: attend to memory, normalize, feed forward,
    normalize. Dropout hits the attention output and the FFN hidden
    activation, only while dropout_on."""
    p = f"block{block}"
    attended = _attend(latent, memory, mask, params, f"{p}.attn", config)
    if dropout_on and config.dropout > 0.0:
        attended = dc.dropout(attended, config.dropout, rng)
    mid = dc.layer_norm(
        dc.add(latent, attended), params[f"{p}.ln1.gamma"], params[f"{p}.ln1.beta"]
    )
    hidden = dc.gelu(dc.add(dc.matmul(mid, params[f"{p}.ffn.W1"]), params[f"{p}.ffn.b1"]))
    if dropout_on and config.dropout > 0.0:
        hidden = dc.dropout(hidden, config.dropout, rng)
    ffn_out = dc.add(dc.matmul(hidden, params[f"{p}.ffn.W2"]), params[f"{p}.ffn.b2"])
    return dc.layer_norm(
        dc.add(mid, ffn_out), params[f"{p}.ln2.gamma"], params[f"{p}.ln2.beta"]
    )


def relish_forward(
    tokens: TokenStates,
    params: ParamStore,
    config: RelishConfig,
    *,
    dropout_on: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor2:
    """Standardized-scale prediction as a 1x1 graph node.

    Deterministic whenever dropout_on is false; with dropout on, the
    caller must supply the mask-drawing rng.
    """
    if dropout_on and config.dropout > 0.0 and rng is None:
        raise ConfigError("dropout_on requires an rng for mask draws")
    tokens = tokens.compacted()  # keeps padding invariance bit-exact
    memory = project_tokens(tokens, params)
    latent = params["r0"]
    for i in range(config.num_blocks):
        latent = refine_step(
            latent, memory, tokens.mask, params, i, config, dropout_on=dropout_on, rng=rng
        )
    return dc.add(dc.matmul(latent, params["out.w"]), params["out.b"])


def predict(tokens: TokenStates, params: ParamStore, config: RelishConfig) -> float:
    """Standardized-scale prediction as a plain float (no dropout)."""
    return relish_forward(tokens, params, config).item()


# ---------------------------------------------------------------------------
# loss and target scaling


def huber_loss(z_hat: float, z: float, delta: float) -> float:
    """Quadratic within delta of the target, linear beyond; C1 at the knee."""
    if delta <= 0:
        raise ConfigError("huber_loss: delta must be positive")
    r = abs(z_hat - z)
    if r <= delta:
        return 0.5 * r * r
    return delta * (r - 0.5 * delta)


@dataclass(frozen=True)
class TargetNormalizer:
    """Affine target standardization, fit on the training split only."""

    mu: float
    sigma: float
    eps: float = 1e-8

    def __post_init__(self):
        if self.sigma < 0 or self.eps <= 0:
            raise ConfigError("normalizer needs sigma >= 0 and eps > 0")

    def normalize(self, y: float) -> float:
        return (y - self.mu) / (self.sigma + self.eps)

    def denormalize(self, z: float) -> float:
        return z * (self.sigma + self.eps) + self.mu

    def as_dict(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma, "eps": self.eps}

    @classmethod
    def from_dict(cls, raw: dict) -> "TargetNormalizer":
        return cls(mu=raw["mu"], sigma=raw["sigma"], eps=raw["eps"])


def fit_normalizer(train_targets, eps: float = 1e-8) -> TargetNormalizer:
    """Mean and population standard deviation of the training targets."""
    y = np.asarray(list(train_targets), dtype=np.float64)
    if y.size == 0:
        raise DataError("cannot fit a normalizer on zero targets")
    if not np.isfinite(y).all():
        raise DataError("training targets contain non-finite values")
    return TargetNormalizer(mu=float(y.mean()), sigma=float(y.std()), eps=eps)
