"""Deterministic synthetic data: a pseudo-backbone and planted tasks.

Everything here is a pure function of (seed, shape arguments) through
the counter-based generator, so regenerated datasets are byte-identical
across runs, machines, and languages.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DataError
from ..rng import (
    STREAM_EXAMPLE_BASE,
    STREAM_PLANT_DIRECTIONS,
    STREAM_SPLIT_SHUFFLE,
    STREAM_TOKEN_EMBED_BASE,
    CounterRng,
)
from ..tokens import TokenStates
from .hsf import write_hsf
from .manifest import ManifestRecord, write_manifest


def _token_embedding(token_id: int, seed: int, dim: int) -> np.ndarray:
    return CounterRng(seed, STREAM_TOKEN_EMBED_BASE + token_id).normals(dim)


def synth_backbone(token_ids: Sequence[int], seed: int, dim: int) -> np.ndarray:
    """Frozen-backbone stand-in: one deterministic Gaussian embedding per
    token id, mixed with half the previous token's embedding (a bigram
    context), each row scaled to norm sqrt(dim)."""
    if len(token_ids) < 1 or dim < 1:
        raise ConfigError("need at least one token and one dimension")
    if any(t < 0 for t in token_ids):
        raise ConfigError("token ids must be non-negative")
    rows = np.empty((len(token_ids), dim), dtype=np.float64)
    prev: np.ndarray | None = None
    for t, tok in enumerate(token_ids):
        emb = _token_embedding(tok, seed, dim)
        rows[t] = emb if prev is None else emb + 0.5 * prev
        prev = emb
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    rows = rows / norms * np.sqrt(dim)
    return rows.astype(np.float32)


@dataclass(frozen=True)
class PlantedSpec:
    """Needle-retrieval regression task.

    Every token row is isotropic noise; one uniformly placed row also
    carries alpha times a fixed key direction plus the target times an
    orthogonal value direction. Mean pooling dilutes that signal by
    1/seq_len while attention can retrieve the row exactly, which is
    what separates the two model families on this task.
    """

    n: int = 2000
    seq_len: int = 64
    dim: int = 64
    alpha: float = 4.0
    noise_std: float = 1.0
    target_lo: float = 0.0
    target_hi: float = 10.0

    def __post_init__(self):
        if self.n < 1 or self.seq_len < 1 or self.dim < 2:
            raise ConfigError("planted task needs n >= 1, seq_len >= 1, dim >= 2")
        if not self.target_hi > self.target_lo:
            raise ConfigError("target range is empty")
        if self.noise_std < 0 or self.alpha < 0:
            raise ConfigError("alpha and noise_std must be non-negative")


def plant_directions(dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Key and value unit vectors, exactly orthogonal, fixed by seed."""
    rng = CounterRng(seed, STREAM_PLANT_DIRECTIONS)
    key = rng.normals(dim)
    key /= np.linalg.norm(key)
    value = rng.normals(dim)
    value -= np.dot(value, key) * key
    value /= np.linalg.norm(value)
    return key, value


def planted_examples(spec: PlantedSpec, seed: int) -> list[TokenStates]:
    """The full task as in-memory examples, ids ex000000 and up."""
    key, value = plant_directions(spec.dim, seed)
    examples = []
    for i in range(spec.n):
        rng = CounterRng(seed, STREAM_EXAMPLE_BASE + i)
        states = spec.noise_std * rng.normal_matrix(spec.seq_len, spec.dim)
        needle = int(rng.integers(1, spec.seq_len)[0])
        y = float(rng.uniform_matrix(1, 1, spec.target_lo, spec.target_hi)[0, 0])
        states[needle] += spec.alpha * key + y * value
        examples.append(
            TokenStates.dense(states.astype(np.float32), id=f"ex{i:06d}", target=y)
        )
    return examples


@dataclass(frozen=True)
class OrdinalSpec:
    """Toy grid-classification regression: each example belongs to one
    grid cell, its features are that cell's fixed pattern plus noise,
    and the target is the cell's numeric value exactly."""

    n: int = 600
    feature_dim: int = 16
    grid_values: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
    noise_std: float = 0.25

    def __post_init__(self):
        if self.n < 1 or self.feature_dim < 1 or len(self.grid_values) < 2:
            raise ConfigError("ordinal task needs n >= 1, feature_dim >= 1, >= 2 grid cells")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")


def ordinal_examples(spec: OrdinalSpec, seed: int) -> list[TokenStates]:
    """Single-row examples (the row is the feature vector), so the same
    manifest and pooling machinery serves the grid-logit method."""
    rng_dirs = CounterRng(seed, STREAM_PLANT_DIRECTIONS)
    patterns = rng_dirs.normal_matrix(len(spec.grid_values), spec.feature_dim)
    examples = []
    for i in range(spec.n):
        rng = CounterRng(seed, STREAM_EXAMPLE_BASE + i)
        cell = int(rng.integers(1, len(spec.grid_values))[0])
        feats = patterns[cell] + spec.noise_std * rng.normals(spec.feature_dim)
        examples.append(
            TokenStates.dense(
                feats.reshape(1, -1).astype(np.float32),
                id=f"ex{i:06d}",
                target=float(spec.grid_values[cell]),
            )
        )
    return examples


def assign_splits(
    n: int, seed: int, train_frac: float = 0.8, val_frac: float = 0.1
) -> list[str]:
    """Deterministic shuffled split labels; the leftover after train and
    val is the test split."""
    if not 0 < train_frac < 1 or not 0 < val_frac < 1 or train_frac + val_frac >= 1:
        raise ConfigError("split fractions must be positive and sum below 1")
    n_train = round(n * train_frac)
    n_val = round(n * val_frac)
    if n_train < 1 or n_val < 1 or n - n_train - n_val < 1:
        raise DataError(f"n={n} leaves an empty split at {train_frac}/{val_frac}")
    order = CounterRng(seed, STREAM_SPLIT_SHUFFLE).shuffled(n)
    labels = [""] * n
    for rank, idx in enumerate(order):
        if rank < n_train:
            labels[idx] = "train"
        elif rank < n_train + n_val:
            labels[idx] = "val"
        else:
            labels[idx] = "test"
    return labels


def write_dataset(examples: Sequence[TokenStates], splits: Sequence[str], out_dir) -> Path:
    """Materialize examples as one state file each plus manifest.tsv."""
    if len(examples) != len(splits):
        raise DataError("one split label per example required")
    out = Path(out_dir)
    states_dir = out / "states"
    states_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for ex, split in zip(examples, splits):
        if ex.target is None:
            raise DataError(f"example {ex.id!r} has no target")
        rel = f"states/{ex.id}.hsf"
        write_hsf(out / rel, ex.states)
        records.append(ManifestRecord(id=ex.id, path=rel, target=ex.target, split=split))
    manifest_path = out / "manifest.tsv"
    write_manifest(manifest_path, records)
    return manifest_path
