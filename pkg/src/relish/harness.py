"""Training and evaluation loops, early stopping, checkpoints, ablations.

One run = one (method, seed) training on a train/val split: AdamW with
linear warmup and decay, loss on standardized targets, early stop on
validation RMSE, parameters restored from the best epoch. Everything
observable about a run is deterministic in (config, data, seed).
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field
from math import ceil
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import baselines, decisions, head
from . import diffcore as dc
from .baselines import LinearHeadConfig, MlpHeadConfig
from .data.batching import make_batches
from .decisions import GridLogitConfig
from .diffcore import AdamWConfig, LrSchedule, OptimState, ParamStore, Tensor2
from .errors import ConfigError, DataError, NonFiniteError, TrainingError
from .head import RelishConfig, TargetNormalizer, fit_normalizer
from .metrics import RunRecord, nrmse, pearson, rmse, spearman
from .tokens import TokenStates

DEFAULT_SEEDS = (42, 1234, 2026)

METHODS = ("relish", "linear", "mlp", "grid-logit-raft")
LOSSES = ("huber", "mse")

HeadConfig = Union[RelishConfig, LinearHeadConfig, MlpHeadConfig, GridLogitConfig]

_HEAD_TYPES = {
    "relish": RelishConfig,
    "linear": LinearHeadConfig,
    "mlp": MlpHeadConfig,
    "grid-logit-raft": GridLogitConfig,
}


@dataclass(frozen=True)
class TrainConfig:
    """One run's recipe. micro_batch only splits the gradient
    accumulation; the parameter trajectory depends on effective_batch
    alone. grid-logit-raft trains on raw targets with its own squared
    objective and ignores loss/huber_delta."""

    method: str
    head: HeadConfig
    seed: int = DEFAULT_SEEDS[0]
    lr: float = 1e-4
    effective_batch: int = 32
    micro_batch: Optional[int] = None
    max_epochs: int = 10
    patience: int = 2
    warmup_ratio: float = 0.1
    weight_decay: float = 0.01
    loss: str = "huber"
    huber_delta: float = 1.0
    target_eps: float = 1e-8

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if not isinstance(self.head, _HEAD_TYPES[self.method]):
            raise ConfigError(
                f"method {self.method!r} needs a {_HEAD_TYPES[self.method].__name__}, "
                f"got {type(self.head).__name__}"
            )
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}, expected one of {LOSSES}")
        if self.lr <= 0 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("lr > 0, max_epochs >= 1, patience >= 1 required")
        if self.effective_batch < 1:
            raise ConfigError("effective_batch must be at least 1")
        if self.micro_batch is not None and (
            self.micro_batch < 1 or self.effective_batch % self.micro_batch != 0
        ):
            raise ConfigError("micro_batch must divide effective_batch")
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise ConfigError("warmup_ratio must lie in [0, 1)")
        if self.weight_decay < 0 or self.huber_delta <= 0 or self.target_eps <= 0:
            raise ConfigError("weight_decay >= 0, huber_delta > 0, target_eps > 0 required")
        if isinstance(self.head, RelishConfig) and self.head.huber_delta != self.huber_delta:
            raise ConfigError(
                f"huber_delta {self.huber_delta} disagrees with the head's "
                f"{self.head.huber_delta}; set both from one value"
            )


@dataclass
class TrainHistory:
    train_losses: list[float] = field(default_factory=list)
    val_rmses: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = ""

    def as_dict(self) -> dict:
        return {
            "train_losses": self.train_losses,
            "val_rmses": self.val_rmses,
            "best_epoch": self.best_epoch,
            "stop_reason": self.stop_reason,
        }


@dataclass
class TrainResult:
    config: TrainConfig
    params: ParamStore
    normalizer: Optional[TargetNormalizer]
    history: TrainHistory


class EarlyStopping:
    """Strict-improvement tracker: the best epoch is the first one with
    the minimal validation score, and training stops once `patience`
    consecutive epochs fail to improve on it."""

    def __init__(self, patience: int):
        if patience < 1:
            raise ConfigError("patience must be at least 1")
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.since_best = 0

    def update(self, epoch: int, value: float) -> tuple[bool, bool]:
        """Returns (improved, should_stop) for this epoch's score."""
        if value < self.best:
            self.best = value
            self.best_epoch = epoch
            self.since_best = 0
            return True, False
        self.since_best += 1
        return False, self.since_best >= self.patience


def _init_params(config: TrainConfig) -> ParamStore:
    if config.method == "relish":
        return head.init_params(config.head, config.seed)
    if config.method == "linear":
        return baselines.init_linear_params(config.head, config.seed)
    if config.method == "mlp":
        return baselines.init_mlp_params(config.head, config.seed)
    return decisions.init_grid_logit_params(config.head, config.seed)


def _pooled_constant(tokens: TokenStates, dtype) -> Tensor2:
    return dc.constant(baselines.masked_mean_pool(tokens), dtype=dtype)


def _loss_graph(
    config: TrainConfig,
    params: ParamStore,
    tokens: TokenStates,
    target: float,
    *,
    dropout_on: bool,
    rng: Optional[np.random.Generator],
) -> Tensor2:
    dtype = next(iter(params.items()))[1].value.dtype
    if config.method == "relish":
        pred = head.relish_forward(
            tokens, params, config.head, dropout_on=dropout_on, rng=rng
        )
    elif config.method == "linear":
        pred = baselines.linear_head_forward(_pooled_constant(tokens, dtype), params)
    elif config.method == "mlp":
        pred = baselines.mlp_head_forward(
            _pooled_constant(tokens, dtype), params, config.head, dropout_on=dropout_on, rng=rng
        )
    else:
        features = _pooled_constant(tokens, dtype)
        return decisions.raft_loss_graph(features, target, params, config.head)
    if config.loss == "huber":
        return dc.huber(pred, target, config.huber_delta)
    return dc.squared_error(pred, target)


def make_predictor(
    config: TrainConfig, params: ParamStore, normalizer: Optional[TargetNormalizer]
) -> Callable[[TokenStates], float]:
    """Gold-scale prediction function with dropout off."""
    dtype = next(iter(params.items()))[1].value.dtype

    def run(tokens: TokenStates) -> float:
        if config.method == "relish":
            z = head.relish_forward(tokens, params, config.head).item()
        elif config.method == "linear":
            z = baselines.linear_head_forward(_pooled_constant(tokens, dtype), params).item()
        elif config.method == "mlp":
            z = baselines.mlp_head_forward(
                _pooled_constant(tokens, dtype), params, config.head
            ).item()
        else:
            feats = baselines.masked_mean_pool(tokens)
            return decisions.grid_predict(feats, params, config.head)
        return normalizer.denormalize(z) if normalizer is not None else z

    return run


def _val_rmse(
    config: TrainConfig, params: ParamStore, normalizer, val: Sequence[TokenStates]
) -> float:
    predict = make_predictor(config, params, normalizer)
    preds = [predict(ex) for ex in val]
    golds = [ex.target for ex in val]
    return rmse(preds, golds)


def train(
    config: TrainConfig,
    train_examples: Sequence[TokenStates],
    val_examples: Sequence[TokenStates],
) -> TrainResult:
    """Optimize, watch validation RMSE, return the best epoch's weights.

    The schedule covers ceil(n/batch) * max_epochs steps no matter when
    early stopping truncates the run. The target normalizer is fit on
    the training split alone; validation targets never touch it.
    """
    if not train_examples or not val_examples:
        raise DataError("train and val splits must both be non-empty")
    if any(ex.target is None for ex in list(train_examples) + list(val_examples)):
        raise DataError("training requires a target on every example")

    normalizer: Optional[TargetNormalizer] = None
    if config.method != "grid-logit-raft":
        normalizer = fit_normalizer(
            [ex.target for ex in train_examples], eps=config.target_eps
        )

    params = _init_params(config)
    optim_state = OptimState.for_params(params)
    adamw = AdamWConfig(weight_decay=config.weight_decay)
    steps_per_epoch = ceil(len(train_examples) / config.effective_batch)
    schedule = LrSchedule(
        base_lr=config.lr,
        total_steps=steps_per_epoch * config.max_epochs,
        warmup_ratio=config.warmup_ratio,
    )

    history = TrainHistory()
    stopper = EarlyStopping(config.patience)
    best_params = params.snapshot()

    for epoch in range(1, config.max_epochs + 1):
        batches = make_batches(
            train_examples, config.effective_batch, seed=config.seed, epoch=epoch - 1
        )
        epoch_loss = 0.0
        n_examples = 0
        for batch_idx, batch in enumerate(batches):
            rng = np.random.default_rng((config.seed, epoch, batch_idx))
            params.zero_grads()
            for ex in batch.examples:
                target = (
                    normalizer.normalize(ex.target) if normalizer is not None else ex.target
                )
                try:
                    loss = _loss_graph(
                        config, params, ex, target, dropout_on=True, rng=rng
                    )
                    dc.backward(dc.scale(loss, 1.0 / batch.size))
                except NonFiniteError as err:
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, step {optim_state.t + 1} "
                        f"(example {ex.id!r}): {err}"
                    ) from err
                epoch_loss += loss.item()
                n_examples += 1
            dc.adamw_step(params, optim_state, schedule.lr_at(optim_state.t + 1), adamw)
            try:
                params.check_finite()
            except NonFiniteError as err:
                raise TrainingError(
                    f"parameters diverged at epoch {epoch}, step {optim_state.t}: {err}"
                ) from err
        history.train_losses.append(epoch_loss / n_examples)

        val_score = _val_rmse(config, params, normalizer, val_examples)
        history.val_rmses.append(val_score)
        improved, should_stop = stopper.update(epoch, val_score)
        if improved:
            best_params = params.snapshot()
            history.best_epoch = epoch
        elif should_stop:
            history.stop_reason = "early_stop"
            break
    if not history.stop_reason:
        history.stop_reason = "max_epochs"

    params.load(best_params)
    return TrainResult(config=config, params=params, normalizer=normalizer, history=history)


def evaluate(
    result_or_checkpoint,
    examples: Sequence[TokenStates],
    *,
    dataset: str,
    backbone: str,
    gold_range: tuple[float, float],
) -> RunRecord:
    """All four metrics of one split at gold scale."""
    r = result_or_checkpoint
    if not examples:
        raise DataError("cannot evaluate an empty split")
    if any(ex.target is None for ex in examples):
        raise DataError("evaluation requires a target on every example")
    predict = make_predictor(r.config, r.params, r.normalizer)
    preds = [predict(ex) for ex in examples]
    golds = [ex.target for ex in examples]
    return RunRecord(
        dataset=dataset,
        backbone=backbone,
        method=r.config.method,
        seed=r.config.seed,
        pearson=pearson(preds, golds),
        spearman=spearman(preds, golds),
        rmse=rmse(preds, golds),
        nrmse=nrmse(preds, golds, gold_range[0], gold_range[1]),
    )


# ---------------------------------------------------------------------------
# checkpoint file: magic RCK1, version, JSON run echo, float32 payloads

_CKPT_MAGIC = b"RCK1"
_CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sII")


def _head_config_dict(config: TrainConfig) -> dict:
    h = config.head
    if isinstance(h, RelishConfig):
        return h.as_dict()
    if isinstance(h, LinearHeadConfig):
        return {"backbone_dim": h.backbone_dim}
    if isinstance(h, MlpHeadConfig):
        return {"backbone_dim": h.backbone_dim, "hidden": h.hidden, "dropout": h.dropout}
    return {"feature_dim": h.feature_dim, "grid": [[s, v] for s, v in h.grid]}


def _head_config_from_dict(method: str, raw: dict) -> HeadConfig:
    if method == "relish":
        return RelishConfig.from_dict(raw)
    if method == "linear":
        return LinearHeadConfig(**raw)
    if method == "mlp":
        return MlpHeadConfig(**raw)
    return GridLogitConfig(
        feature_dim=raw["feature_dim"],
        grid=tuple((s, float(v)) for s, v in raw["grid"]),
    )


def save_checkpoint(path, result: TrainResult) -> None:
    config = result.config
    echo = {
        "method": config.method,
        "seed": config.seed,
        "lr": config.lr,
        "effective_batch": config.effective_batch,
        "max_epochs": config.max_epochs,
        "patience": config.patience,
        "warmup_ratio": config.warmup_ratio,
        "weight_decay": config.weight_decay,
        "loss": config.loss,
        "huber_delta": config.huber_delta,
        "target_eps": config.target_eps,
        "head_config": _head_config_dict(config),
        "normalizer": result.normalizer.as_dict() if result.normalizer else None,
        "history": result.history.as_dict(),
        "params": [
            [name, p.value.shape[0], p.value.shape[1]] for name, p in result.params.items()
        ],
    }
    blob = json.dumps(echo, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_HEADER.pack(_CKPT_MAGIC, _CKPT_VERSION, len(blob)))
        fh.write(blob)
        for name, p in result.params.items():
            fh.write(np.ascontiguousarray(p.value, dtype="<f4").tobytes())


def load_checkpoint(path) -> TrainResult:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"checkpoint {p} does not exist")
    raw = p.read_bytes()
    if len(raw) < _CKPT_HEADER.size:
        raise DataError(f"{path}: shorter than the checkpoint header")
    magic, version, blob_len = _CKPT_HEADER.unpack_from(raw)
    if magic != _CKPT_MAGIC or version != _CKPT_VERSION:
        raise DataError(f"{path}: bad checkpoint magic/version {magic!r} v{version}")
    offset = _CKPT_HEADER.size
    echo = json.loads(raw[offset : offset + blob_len].decode("utf-8"))
    offset += blob_len

    method = echo["method"]
    head_config = _head_config_from_dict(method, echo["head_config"])
    config = TrainConfig(
        method=method,
        head=head_config,
        seed=echo["seed"],
        lr=echo["lr"],
        effective_batch=echo["effective_batch"],
        max_epochs=echo["max_epochs"],
        patience=echo["patience"],
        warmup_ratio=echo["warmup_ratio"],
        weight_decay=echo["weight_decay"],
        loss=echo["loss"],
        huber_delta=echo["huber_delta"],
        target_eps=echo["target_eps"],
    )
    dtype = np.float64 if method == "grid-logit-raft" else np.float32
    params = ParamStore()
    for name, rows, cols in echo["params"]:
        need = 4 * rows * cols
        if offset + need > len(raw):
            raise DataError(f"{path}: truncated payload at parameter {name!r}")
        block = np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=offset)
        params.add(name, block.reshape(rows, cols), dtype=dtype)
        offset += need
    if offset != len(raw):
        raise DataError(f"{path}: {len(raw) - offset} trailing bytes after payload")
    if method == "relish":
        head.check_params(params, head_config)

    normalizer = (
        TargetNormalizer.from_dict(echo["normalizer"]) if echo["normalizer"] else None
    )
    history = TrainHistory(**echo["history"])
    return TrainResult(config=config, params=params, normalizer=normalizer, history=history)


# ---------------------------------------------------------------------------
# ablations


def ablate_depth(
    base: TrainConfig,
    depths: Sequence[int],
    train_examples: Sequence[TokenStates],
    val_examples: Sequence[TokenStates],
    test_examples: Sequence[TokenStates],
    *,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    dataset: str = "planted",
    backbone: str = "synth",
    gold_range: tuple[float, float],
) -> list[RunRecord]:
    """One independent run per (depth, seed), same seeds at every depth.

    Records are tagged relish-L{depth}; depth 1 is the single-pass
    attention-pooling baseline (the loop body runs once)."""
    if base.method != "relish":
        raise ConfigError("depth ablation applies to the relish method")
    records = []
    for depth in depths:
        head_cfg = dataclasses.replace(base.head, num_blocks=depth)
        for seed in seeds:
            config = dataclasses.replace(base, head=head_cfg, seed=seed)
            result = train(config, train_examples, val_examples)
            rec = evaluate(
                result, test_examples, dataset=dataset, backbone=backbone, gold_range=gold_range
            )
            records.append(dataclasses.replace(rec, method=f"relish-L{depth}"))
    return records


def ablate_loss(
    base: TrainConfig,
    train_examples: Sequence[TokenStates],
    val_examples: Sequence[TokenStates],
    test_examples: Sequence[TokenStates],
    *,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    dataset: str = "planted",
    backbone: str = "synth",
    gold_range: tuple[float, float],
) -> list[RunRecord]:
    """Paired runs per seed differing only in the loss; both keep target
    standardization, and a (seed, loss-independent) init means each pair
    starts from identical weights."""
    if base.method != "relish":
        raise ConfigError("loss ablation applies to the relish method")
    records = []
    for seed in seeds:
        for loss in LOSSES:
            config = dataclasses.replace(base, seed=seed, loss=loss)
            result = train(config, train_examples, val_examples)
            rec = evaluate(
                result, test_examples, dataset=dataset, backbone=backbone, gold_range=gold_range
            )
            records.append(dataclasses.replace(rec, method=f"relish-{loss}"))
    return records


def format_depth_report(records: Sequence[RunRecord], depths: Sequence[int]) -> str:
    """Per-depth test Pearson summary; depth 1 is flagged as the
    single-pass attention-pooling baseline."""
    lines = ["depth   mean_pearson   seed_std   note"]
    for depth in depths:
        vals = [r.pearson for r in records if r.method == f"relish-L{depth}"]
        if not vals:
            raise ConfigError(f"no records for depth {depth}")
        mean = float(np.mean(vals))
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        note = "single-pass attention-pooling baseline" if depth == 1 else ""
        lines.append(f"L={depth:<4}  {mean:12.4f}  {std:9.4f}   {note}".rstrip())
    return "\n".join(lines) + "\n"


def format_loss_report(records: Sequence[RunRecord]) -> str:
    lines = ["loss     mean_pearson   seed_std"]
    for loss in LOSSES:
        vals = [r.pearson for r in records if r.method == f"relish-{loss}"]
        if not vals:
            raise ConfigError(f"no records for loss {loss}")
        mean = float(np.mean(vals))
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        lines.append(f"{loss:<7}  {mean:12.4f}  {std:9.4f}")
    gap = abs(
        float(np.mean([r.pearson for r in records if r.method == "relish-huber"]))
        - float(np.mean([r.pearson for r in records if r.method == "relish-mse"]))
    )
    lines.append(f"pearson gap between losses: {gap:.4f}")
    return "\n".join(lines) + "\n"
