"""Shuffled, padded micro-batches over in-memory examples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, DataError
from ..rng import STREAM_EPOCH_BASE, CounterRng
from ..tokens import TokenStates


@dataclass(frozen=True)
class Batch:
    """Examples padded to one common length; padding rows carry mask 0
    and the padded values of real tokens are untouched."""

    examples: tuple[TokenStates, ...]
    targets: np.ndarray

    @property
    def size(self) -> int:
        return len(self.examples)


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    """Deterministic permutation for one epoch of one run."""
    return CounterRng(seed, STREAM_EPOCH_BASE + epoch).shuffled(n)


def make_batches(
    examples: Sequence[TokenStates],
    batch_size: int,
    *,
    seed: Optional[int] = None,
    epoch: int = 0,
) -> list[Batch]:
    """Slice examples into batches of batch_size (last one may be short),
    shuffling first when a seed is given, and pad each batch to its own
    longest sequence."""
    if batch_size < 1:
        raise ConfigError("batch_size must be at least 1")
    if not examples:
        raise DataError("cannot batch zero examples")
    if any(ex.target is None for ex in examples):
        raise DataError("batching requires targets on every example")
    if seed is not None:
        order = epoch_order(len(examples), seed, epoch)
        examples = [examples[i] for i in order]
    else:
        examples = list(examples)
    batches = []
    for start in range(0, len(examples), batch_size):
        chunk = examples[start : start + batch_size]
        longest = max(ex.seq_len for ex in chunk)
        padded = tuple(ex.padded_to(longest) for ex in chunk)
        targets = np.array([ex.target for ex in chunk], dtype=np.float64)
        batches.append(Batch(examples=padded, targets=targets))
    return batches
