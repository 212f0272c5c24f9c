"""AdamW with decoupled weight decay, plus a warmup/linear-decay schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np

from ..errors import ConfigError
from .tensor import ParamStore


@dataclass
class AdamWConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass
class OptimState:
    """First/second moment estimates and the shared step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: ParamStore) -> "OptimState":
        state = cls()
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.value, dtype=np.float64)
            state.v[name] = np.zeros_like(p.value, dtype=np.float64)
        return state


def adamw_step(params: ParamStore, state: OptimState, lr: float, config: AdamWConfig) -> None:
    """One update over every parameter from its accumulated gradient.

    Weight decay is applied to the parameter before the moment update,
    scaled by the step's learning rate and independent of the gradient;
    moments are kept in double precision regardless of parameter dtype.
    """
    state.t += 1
    t = state.t
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for name, p in params.items():
        g = p.grad.astype(np.float64)
        if config.weight_decay != 0.0:
            p.value *= p.value.dtype.type(1.0 - lr * config.weight_decay)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + config.eps)
        p.value -= (lr * update).astype(p.value.dtype)


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup to the base rate, then linear decay to zero.

    Warmup occupies ceil(warmup_ratio * total_steps) steps; the rate at
    step total_steps is exactly zero.
    """

    base_lr: float
    total_steps: int
    warmup_ratio: float = 0.1

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ConfigError("base_lr must be positive")
        if self.total_steps < 1:
            raise ConfigError("total_steps must be at least 1")
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise ConfigError("warmup_ratio must lie in [0, 1)")

    @property
    def warmup_steps(self) -> int:
        return ceil(self.warmup_ratio * self.total_steps)

    def lr_at(self, step: int) -> float:
        """Rate used by optimizer step number ``step`` (1-based)."""
        if not 1 <= step <= self.total_steps:
            raise ConfigError(f"step {step} outside [1, {self.total_steps}]")
        w = self.warmup_steps
        if step <= w:
            return self.base_lr * step / w
        return self.base_lr * (self.total_steps - step) / (self.total_steps - w)
