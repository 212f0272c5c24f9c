"""Decision rules over explicit candidate distributions.

Covers the inference families that read a number out of a distribution
over numeric strings: argmax-then-parse, posterior mean over a fixed
grid, sample-mean over decoded outputs, and the squared-error training
objective on the grid mean. A small trainable softmax-over-grid model
exercises that objective end to end without any language model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import diffcore as dc
from .diffcore import ParamStore, Tensor2
from .errors import ConfigError, EmptySupportError, ParseError, ShapeError
from .rng import STREAM_GRID_INIT, CounterRng

# plain decimal grammar: sign, digits with optional point, optional exponent
_NUMERIC = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?\Z")


def parse_numeric(s: str) -> float:
    """Strict decimal parse after trimming whitespace.

    Accepts forms like "3", "-4.5", ".5", "1e-3". Rejects anything
    else ("abc", "inf", "nan", "0x1f", "1_000") so equivalent renderings
    of one value ("1.0", "1.00") and nothing else collapse together.
    """
    trimmed = s.strip()
    if not _NUMERIC.match(trimmed):
        raise ParseError(f"not a plain decimal number: {s!r}")
    return float(trimmed)


@dataclass(frozen=True)
class GridDistribution:
    """Probabilities over candidate numeric strings with their values."""

    candidates: tuple[tuple[str, float], ...]
    probs: np.ndarray

    def __post_init__(self):
        if len(self.candidates) == 0:
            raise ConfigError("distribution needs at least one candidate")
        if self.probs.shape != (len(self.candidates),):
            raise ShapeError(
                f"probs shape {self.probs.shape} does not match {len(self.candidates)} candidates"
            )
        if (self.probs < 0).any() or abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise ConfigError("probs must be non-negative and sum to 1 within 1e-9")
        for text, value in self.candidates:
            if not np.isfinite(value):
                raise ConfigError(f"candidate value for {text!r} is not finite")
            parsed = parse_numeric(text)
            if abs(parsed - value) > 1e-12 * max(1.0, abs(value)):
                raise ConfigError(f"candidate string {text!r} parses to {parsed}, not {value}")

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.candidates], dtype=np.float64)


def integer_grid(lo: int, hi: int, step: int = 1) -> tuple[tuple[str, float], ...]:
    """Candidates rendered as plain integers, e.g. grids 0..5 or 0,10,..,100."""
    if step < 1 or hi < lo:
        raise ConfigError("grid needs step >= 1 and hi >= lo")
    return tuple((str(v), float(v)) for v in range(lo, hi + 1, step))


def ard_decode(dist: GridDistribution) -> float:
    """Value of the most probable candidate; exact probability ties go to
    the lexicographically smallest candidate string."""
    best = 0
    for i in range(1, len(dist.candidates)):
        p, text = float(dist.probs[i]), dist.candidates[i][0]
        bp, btext = float(dist.probs[best]), dist.candidates[best][0]
        if p > bp or (p == bp and text < btext):
            best = i
    return dist.candidates[best][1]


def rail_grid_mean(dist: GridDistribution) -> float:
    """Expectation of the candidate values under the distribution."""
    return float(np.dot(dist.values, dist.probs))


@dataclass(frozen=True)
class SampleMean:
    value: float
    n_used: int
    n_dropped: int


def rail_sample_mean(samples: Sequence[str | float]) -> SampleMean:
    """Mean of decodable samples; unparseable ones are dropped and counted,
    never zero-filled, so they do not bias the mean."""
    used: list[float] = []
    dropped = 0
    for s in samples:
        if isinstance(s, str):
            try:
                used.append(parse_numeric(s))
            except ParseError:
                dropped += 1
        else:
            used.append(float(s))
    if not used:
        raise EmptySupportError("no sample survived parsing")
    return SampleMean(value=float(np.mean(used)), n_used=len(used), n_dropped=dropped)


def raft_loss(y_star: float, dist: GridDistribution) -> float:
    """Squared gap between the gold value and the grid expectation."""
    gap = y_star - rail_grid_mean(dist)
    return gap * gap


# ---------------------------------------------------------------------------
# trainable softmax-over-grid model


@dataclass(frozen=True)
class GridLogitConfig:
    feature_dim: int
    grid: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be at least 1")
        if len(self.grid) < 1:
            raise ConfigError("grid needs at least one candidate")


def init_grid_logit_params(config: GridLogitConfig, seed: int, dtype=np.float64) -> ParamStore:
    rng = CounterRng(seed, STREAM_GRID_INIT)
    bound = np.sqrt(1.0 / config.feature_dim)
    params = ParamStore()
    params.add(
        "grid.W",
        rng.uniform_matrix(config.feature_dim, len(config.grid), -bound, bound),
        dtype=dtype,
    )
    params.add("grid.b", np.zeros((1, len(config.grid))), dtype=dtype)
    return params


def grid_logits(features: Tensor2, params: ParamStore) -> Tensor2:
    if features.cols != params["grid.W"].rows:
        raise ShapeError(
            f"feature dim {features.cols} does not match weights {params['grid.W'].rows}"
        )
    return dc.add(dc.matmul(features, params["grid.W"]), params["grid.b"])


def grid_logit_forward(
    features: np.ndarray, params: ParamStore, config: GridLogitConfig
) -> GridDistribution:
    """Softmax over per-candidate logits for one feature vector."""
    f = dc.constant(np.atleast_2d(features), dtype=params["grid.W"].value.dtype)
    logits = grid_logits(f, params)
    probs = dc.masked_softmax(logits, np.ones(len(config.grid), dtype=np.uint8))
    return GridDistribution(candidates=config.grid, probs=probs.value[0].astype(np.float64))


def raft_loss_graph(
    features: Tensor2, y_star: float, params: ParamStore, config: GridLogitConfig
) -> Tensor2:
    """Differentiable squared-error of the grid expectation, for training
    the logit model; gradients flow through the softmax to the weights."""
    logits = grid_logits(features, params)
    probs = dc.masked_softmax(logits, np.ones(len(config.grid), dtype=np.uint8))
    values = dc.constant(
        np.array([[v] for _, v in config.grid]), dtype=probs.value.dtype
    )
    expectation = dc.matmul(probs, values)
    return dc.squared_error(expectation, y_star)


def grid_predict(features: np.ndarray, params: ParamStore, config: GridLogitConfig) -> float:
    return rail_grid_mean(grid_logit_forward(features, params, config))
