"""Correlation and error metrics plus seed-level macro aggregation.

Degenerate inputs (constant series, zero gold range) raise typed errors
instead of returning 0: a silent zero would corrupt every macro mean
downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DegenerateSeriesError, MetricError, RangeError

METRIC_NAMES = ("pearson", "spearman", "rmse", "nrmse")


def _paired(preds, golds, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds, dtype=np.float64)
    g = np.asarray(golds, dtype=np.float64)
    if p.ndim != 1 or g.ndim != 1 or p.shape != g.shape:
        raise MetricError(f"series must be equal-length vectors, got {p.shape} and {g.shape}")
    if p.size < min_len:
        raise MetricError(f"need at least {min_len} points, got {p.size}")
    if not (np.isfinite(p).all() and np.isfinite(g).all()):
        raise MetricError("series contain non-finite values")
    return p, g


def pearson(preds, golds) -> float:
    """Sample linear correlation coefficient."""
    p, g = _paired(preds, golds, 2)
    pc = p - p.mean()
    gc = g - g.mean()
    denom = np.sqrt((pc * pc).sum() * (gc * gc).sum())
    if denom == 0.0:
        which = "predictions" if (pc == 0).all() else "golds"
        raise DegenerateSeriesError(f"constant {which} series has undefined correlation")
    return float((pc * gc).sum() / denom)


def average_ranks(values) -> np.ndarray:
    """1-based ranks; a group of ties shares the mean of its rank span."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(preds, golds) -> float:
    """Linear correlation of tie-averaged ranks."""
    p, g = _paired(preds, golds, 2)
    return pearson(average_ranks(p), average_ranks(g))


def rmse(preds, golds) -> float:
    p, g = _paired(preds, golds, 1)
    return float(np.sqrt(np.mean((p - g) ** 2)))


def nrmse(preds, golds, y_min: float, y_max: float) -> float:
    """Error as a fraction of the dataset's nominal gold range, so scores
    on 0-5 and 0-100 scales are comparable. The range is the dataset
    definition's, not the sample's empirical min/max."""
    if not y_max > y_min:
        raise RangeError(f"gold range [{y_min}, {y_max}] is empty")
    return rmse(preds, golds) / (y_max - y_min)


@dataclass(frozen=True)
class RunRecord:
    """Metrics of one (dataset, backbone, method, seed) evaluation."""

    dataset: str
    backbone: str
    method: str
    seed: int
    pearson: float
    spearman: float
    rmse: float
    nrmse: float

    def metric(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise MetricError(f"unknown metric {name!r}, expected one of {METRIC_NAMES}")
        return getattr(self, name)

    def as_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "backbone": self.backbone,
            "method": self.method,
            "seed": self.seed,
            "pearson": self.pearson,
            "spearman": self.spearman,
            "rmse": self.rmse,
            "nrmse": self.nrmse,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunRecord":
        return cls(**raw)


@dataclass(frozen=True)
class AggregateStat:
    """Macro mean over (dataset, backbone) cells, then spread over seeds."""

    mean: float
    std: float
    per_seed: tuple[float, ...]

    @property
    def n_seeds(self) -> int:
        return len(self.per_seed)


def macro_aggregate(records, metric: str) -> AggregateStat:
    """Per-seed macro mean over (dataset, backbone) cells, then mean and
    sample (n-1) standard deviation across seeds.

    Every seed must cover exactly the same cells, once each; aggregate
    one method at a time. A single seed reports std 0 (n_seeds tells
    the reader it is not an estimate).
    """
    by_seed: dict[int, dict[tuple[str, str], float]] = {}
    for rec in records:
        cell = (rec.dataset, rec.backbone)
        seen = by_seed.setdefault(rec.seed, {})
        if cell in seen:
            raise CoverageError(
                f"seed {rec.seed} has duplicate records for {cell}; "
                "aggregate one method at a time"
            )
        seen[cell] = rec.metric(metric)
    if not by_seed:
        raise CoverageError("no records to aggregate")
    seeds = sorted(by_seed)
    cells = set(by_seed[seeds[0]])
    for s in seeds[1:]:
        if set(by_seed[s]) != cells:
            raise CoverageError(
                f"seed {s} covers {sorted(set(by_seed[s]))}, "
                f"seed {seeds[0]} covers {sorted(cells)}"
            )
    per_seed = tuple(float(np.mean(list(by_seed[s].values()))) for s in seeds)
    mean = float(np.mean(per_seed))
    std = float(np.std(per_seed, ddof=1)) if len(per_seed) > 1 else 0.0
    return AggregateStat(mean=mean, std=std, per_seed=per_seed)


def format_metrics_table(records) -> str:
    """Plain-text report: one row per metric, one column per method,
    cells mean +/- seed std over the aggregated runs."""
    methods = sorted({r.method for r in records})
    if not methods:
        raise CoverageError("no records to format")
    width = max(12, *(len(m) + 2 for m in methods))
    header = "metric".ljust(10) + "".join(m.rjust(width) for m in methods)
    lines = [header, "-" * len(header)]
    for name in METRIC_NAMES:
        cells = []
        for m in methods:
            stat = macro_aggregate([r for r in records if r.method == m], name)
            cells.append(f"{stat.mean:.4f}±{stat.std:.4f}".rjust(width))
        lines.append(name.ljust(10) + "".join(cells))
    return "\n".join(lines) + "\n"
