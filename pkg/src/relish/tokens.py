"""Containers for frozen-backbone token states."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class TokenStates:
    """One example: a seq_len x dim matrix of final-layer token states.

    States come out of a frozen backbone once and never receive
    gradients; only heads stacked on top of them train. ``mask`` marks
    real tokens with 1 and padding with 0; at least one token must be
    real. ``target`` may be absent at inference time.
    """

    states: np.ndarray
    mask: np.ndarray
    id: str = ""
    target: Optional[float] = None

    def __post_init__(self):
        if self.states.ndim != 2:
            raise ShapeError(f"token states must be 2-D, got ndim={self.states.ndim}")
        s, d = self.states.shape
        if s < 1 or d < 1:
            raise ShapeError(f"token states must be non-empty, got {self.states.shape}")
        if not np.isfinite(self.states).all():
            raise ShapeError(f"token states contain non-finite entries (example {self.id!r})")
        if self.mask.ndim != 1 or self.mask.shape[0] != s:
            raise ShapeError(f"mask shape {self.mask.shape} does not match {s} tokens")
        if not np.isin(self.mask, (0, 1)).all():
            raise ShapeError("mask entries must be 0 or 1")
        if not self.mask.any():
            raise ShapeError(f"example {self.id!r} has no unmasked token")

    @classmethod
    def dense(cls, states: np.ndarray, id: str = "", target: Optional[float] = None) -> "TokenStates":
        """All tokens real, no padding."""
        return cls(
            states=states,
            mask=np.ones(states.shape[0], dtype=np.uint8),
            id=id,
            target=target,
        )

    @property
    def seq_len(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def num_real(self) -> int:
        return int(self.mask.sum())

    def compacted(self) -> "TokenStates":
        """Drop masked rows entirely.

        Removing padding before any matrix product (instead of zeroing
        it afterwards) is what makes padding invariance bit-exact: BLAS
        may sum in a different order for different shapes, so even
        zero-weight rows can perturb low bits if they stay in the
        operands.
        """
        if self.mask.all():
            return self
        keep = self.mask.astype(bool)
        return TokenStates(
            states=self.states[keep],
            mask=np.ones(int(keep.sum()), dtype=self.mask.dtype),
            id=self.id,
            target=self.target,
        )

    def padded_to(self, seq_len: int) -> "TokenStates":
        """Append zero rows with mask 0; values of real tokens untouched."""
        if seq_len < self.seq_len:
            raise ShapeError(f"cannot pad {self.seq_len} tokens down to {seq_len}")
        if seq_len == self.seq_len:
            return self
        extra = seq_len - self.seq_len
        return TokenStates(
            states=np.concatenate(
                [self.states, np.zeros((extra, self.dim), dtype=self.states.dtype)]
            ),
            mask=np.concatenate([self.mask, np.zeros(extra, dtype=self.mask.dtype)]),
            id=self.id,
            target=self.target,
        )
