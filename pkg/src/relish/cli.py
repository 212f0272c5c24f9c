"""Command-line front door.

Subcommands: train, eval, params, gradcheck, synth, ablate-depth,
ablate-loss, validate-hsf. Run definitions live in a JSON config file
so ablations stay diffable; unknown keys are rejected. Exit codes:
0 success, 2 config error, 3 data error, 4 numeric or training error.
Outputs carry no timestamps, so identical inputs produce identical
artifact trees.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines, harness, head
from .baselines import LinearHeadConfig, MlpHeadConfig
from .data import (
    OrdinalSpec,
    PlantedSpec,
    assign_splits,
    load_manifest,
    ordinal_examples,
    planted_examples,
    validate_hsf,
    write_dataset,
)
from .decisions import GridLogitConfig, integer_grid
from .diffcore import grad_check
from .errors import (
    ConfigError,
    DataError,
    ParseError,
    RelishError,
    TrainingError,
)
from .gradsuite import GRAD_SUITE_DEFAULTS, run_grad_suite
from .harness import DEFAULT_SEEDS, TrainConfig, evaluate, load_checkpoint, save_checkpoint, train
from .head import RelishConfig, count_parameters
from .metrics import format_metrics_table

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

# Reference footprints: backbone width -> (trainable values, matched MLP width)
REFERENCE_BUDGETS = {
    4096: (3_418_625, 704),
    5120: (3_680_769, 640),
    5376: (3_746_305, 640),
}


def _reject_unknown(raw: dict, known: set[str], where: str) -> None:
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {unknown}")


_TRAIN_KEYS = {
    "lr",
    "effective_batch",
    "micro_batch",
    "max_epochs",
    "patience",
    "warmup_ratio",
    "weight_decay",
    "loss",
    "huber_delta",
    "target_eps",
}
_HEAD_KEYS = {
    "relish": {"head_dim", "num_heads", "num_blocks", "ffn_hidden", "dropout", "huber_delta"},
    "linear": set(),
    "mlp": {"hidden", "dropout"},
    "grid-logit-raft": {"grid"},
}
_TOP_KEYS = {
    "method",
    "manifest",
    "gold_range",
    "seeds",
    "out_dir",
    "dataset",
    "backbone",
    "train",
    "head",
}


def _build_head_config(method: str, raw: dict, state_dim: int):
    _reject_unknown(raw, _HEAD_KEYS[method], f"head ({method})")
    if method == "relish":
        return RelishConfig(backbone_dim=state_dim, **raw)
    if method == "linear":
        return LinearHeadConfig(backbone_dim=state_dim)
    if method == "mlp":
        raw = dict(raw)
        if "hidden" not in raw:
            # width matched against the refinement head's budget at default shape
            budget = count_parameters(RelishConfig(backbone_dim=state_dim))
            raw["hidden"] = baselines.match_mlp_hidden(state_dim, budget)
        return MlpHeadConfig(backbone_dim=state_dim, **raw)
    grid_raw = raw.get("grid")
    if not isinstance(grid_raw, dict):
        raise ConfigError('grid-logit-raft needs head.grid = {"lo": .., "hi": .., "step": ..}')
    _reject_unknown(grid_raw, {"lo", "hi", "step"}, "head.grid")
    grid = integer_grid(grid_raw["lo"], grid_raw["hi"], grid_raw.get("step", 1))
    return GridLogitConfig(feature_dim=state_dim, grid=grid)


class RunSpec:
    """Parsed run config: everything cmd_train and the ablations need."""

    def __init__(self, config_path: str):
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path} is not valid JSON: {err}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path} must hold a JSON object")
        _reject_unknown(raw, _TOP_KEYS, "config")
        for key in ("method", "manifest", "gold_range", "out_dir"):
            if key not in raw:
                raise ConfigError(f"config key {key!r} is required")

        self.method: str = raw["method"]
        if self.method not in harness.METHODS:
            raise ConfigError(
                f"unknown method {self.method!r}, expected one of {harness.METHODS}"
            )
        gr = raw["gold_range"]
        if not (isinstance(gr, list) and len(gr) == 2):
            raise ConfigError("gold_range must be [y_min, y_max]")
        self.gold_range: tuple[float, float] = (float(gr[0]), float(gr[1]))
        if not self.gold_range[1] > self.gold_range[0]:
            raise ConfigError("gold_range must satisfy y_min < y_max")

        self.seeds = tuple(int(s) for s in raw.get("seeds", DEFAULT_SEEDS))
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        self.manifest_path = (path.parent / raw["manifest"]).resolve()
        self.out_dir = path.parent / raw["out_dir"]
        self.dataset_label = raw.get("dataset", self.manifest_path.parent.name)
        self.backbone_label = raw.get("backbone", "synth")

        train_raw = raw.get("train", {})
        _reject_unknown(train_raw, _TRAIN_KEYS, "train")
        self._train_raw = train_raw
        self._head_raw = raw.get("head", {})

    def load_data(self):
        index = load_manifest(self.manifest_path)
        return index, {name: index.load_split(name) for name in ("train", "val", "test")}

    def train_config(self, state_dim: int, seed: int) -> TrainConfig:
        head_cfg = _build_head_config(self.method, self._head_raw, state_dim)
        extra = dict(self._train_raw)
        if isinstance(head_cfg, RelishConfig) and "huber_delta" not in extra:
            extra["huber_delta"] = head_cfg.huber_delta
        return TrainConfig(method=self.method, head=head_cfg, seed=seed, **extra)


def _write_records(path: Path, records) -> None:
    path.write_text(json.dumps([r.as_dict() for r in records], indent=2, sort_keys=True) + "\n")


def cmd_train(args) -> int:
    spec = RunSpec(args.config)
    index, splits = spec.load_data()
    if not splits["train"] or not splits["val"]:
        raise DataError("manifest needs non-empty train and val splits")
    eval_split = "test" if splits["test"] else "val"
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for seed in spec.seeds:
        config = spec.train_config(index.dim, seed)
        result = train(config, splits["train"], splits["val"])
        save_checkpoint(spec.out_dir / f"seed{seed}.rck1", result)
        (spec.out_dir / f"seed{seed}.history.json").write_text(
            json.dumps(result.history.as_dict(), indent=2, sort_keys=True) + "\n"
        )
        rec = evaluate(
            result,
            splits[eval_split],
            dataset=spec.dataset_label,
            backbone=spec.backbone_label,
            gold_range=spec.gold_range,
        )
        records.append(rec)
        print(
            f"seed {seed}: best epoch {result.history.best_epoch} "
            f"({result.history.stop_reason}), {eval_split} pearson {rec.pearson:.4f}, "
            f"rmse {rec.rmse:.4f}"
        )
    _write_records(spec.out_dir / "records.json", records)
    (spec.out_dir / "metrics.txt").write_text(format_metrics_table(records))
    print(f"wrote {len(records)} records to {spec.out_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    result = load_checkpoint(args.checkpoint)
    index = load_manifest(args.manifest)
    examples = index.load_split(args.split)
    if not examples:
        raise DataError(f"split {args.split!r} is empty")
    rec = evaluate(
        result,
        examples,
        dataset=args.dataset,
        backbone=args.backbone,
        gold_range=(args.gold_min, args.gold_max),
    )
    line = json.dumps(rec.as_dict(), indent=2, sort_keys=True)
    print(line)
    out = Path(args.out) if args.out else Path(f"{args.checkpoint}.eval.{args.split}.json")
    out.write_text(line + "\n")
    return EXIT_OK


def cmd_params(args) -> int:
    if args.reference_table:
        print("backbone_dim  refinement_head   mlp_matched_h   mlp_params")
        for dim, (budget, h) in sorted(REFERENCE_BUDGETS.items()):
            got = count_parameters(RelishConfig(backbone_dim=dim))
            matched = baselines.match_mlp_hidden(dim, budget)
            mlp_n = baselines.mlp_param_count(dim, matched)
            status = "" if (got, matched) == (budget, h) else "  MISMATCH"
            print(f"{dim:>12}  {got:>15,}  {matched:>13}  {mlp_n:>11,}{status}")
            if (got, matched) != (budget, h):
                return EXIT_NUMERIC
        return EXIT_OK
    if args.mlp_match:
        d, target = args.mlp_match
        h = baselines.match_mlp_hidden(d, target)
        print(f"d={d} target={target} -> hidden={h} ({baselines.mlp_param_count(d, h):,} values)")
        return EXIT_OK
    if args.backbone_dim is None:
        raise ConfigError("params needs --backbone-dim, --reference-table, or --mlp-match")
    config = RelishConfig(
        backbone_dim=args.backbone_dim,
        head_dim=args.head_dim,
        num_heads=args.num_heads,
        num_blocks=args.num_blocks,
        ffn_hidden=args.ffn_hidden,
    )
    print(f"{count_parameters(config):,}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    report = run_grad_suite(
        backbone_dim=args.backbone_dim,
        head_dim=args.head_dim,
        num_heads=args.num_heads,
        num_blocks=args.num_blocks,
        seq_lens=tuple(args.seq_lens),
        corrupt_param=args.corrupt,
    )
    for name, worst, tol, ok in report.rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<28} worst {worst:.3e}  tol {tol:.0e}")
    if not report.passed:
        print(f"gradient check failed: {report.failure}")
        return EXIT_NUMERIC
    print("all gradient checks passed")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.task == "planted":
        spec = PlantedSpec(
            n=args.n,
            seq_len=args.seq_len,
            dim=args.dim,
            alpha=args.alpha,
            noise_std=args.noise_std,
            target_lo=args.target_lo,
            target_hi=args.target_hi,
        )
        examples = planted_examples(spec, args.seed)
    else:
        spec = OrdinalSpec(
            n=args.n,
            feature_dim=args.dim,
            grid_values=tuple(float(v) for v in range(args.grid_lo, args.grid_hi + 1)),
            noise_std=args.noise_std,
        )
        examples = ordinal_examples(spec, args.seed)
    labels = assign_splits(len(examples), args.seed, args.train_frac, args.val_frac)
    manifest_path = write_dataset(examples, labels, args.out)
    sizes = {s: labels.count(s) for s in ("train", "val", "test")}
    print(f"wrote {len(examples)} examples to {manifest_path} (splits {sizes})")
    if args.validate:
        index = load_manifest(manifest_path)
        for record in index.records:
            validate_hsf(index.root / record.path)
        print(f"validated {len(index.records)} state files")
    return EXIT_OK


def cmd_ablate_depth(args) -> int:
    spec = RunSpec(args.config)
    if spec.method != "relish":
        raise ConfigError("ablate-depth requires method relish")
    index, splits = spec.load_data()
    base = spec.train_config(index.dim, spec.seeds[0])
    depths = [int(d) for d in args.depths.split(",")]
    records = harness.ablate_depth(
        base,
        depths,
        splits["train"],
        splits["val"],
        splits["test"] or splits["val"],
        seeds=spec.seeds,
        dataset=spec.dataset_label,
        backbone=spec.backbone_label,
        gold_range=spec.gold_range,
    )
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    _write_records(spec.out_dir / "depth_records.json", records)
    report = harness.format_depth_report(records, depths)
    (spec.out_dir / "depth_report.txt").write_text(report)
    print(report, end="")
    return EXIT_OK


def cmd_ablate_loss(args) -> int:
    spec = RunSpec(args.config)
    if spec.method != "relish":
        raise ConfigError("ablate-loss requires method relish")
    index, splits = spec.load_data()
    base = spec.train_config(index.dim, spec.seeds[0])
    records = harness.ablate_loss(
        base,
        splits["train"],
        splits["val"],
        splits["test"] or splits["val"],
        seeds=spec.seeds,
        dataset=spec.dataset_label,
        backbone=spec.backbone_label,
        gold_range=spec.gold_range,
    )
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    _write_records(spec.out_dir / "loss_records.json", records)
    report = harness.format_loss_report(records)
    (spec.out_dir / "loss_report.txt").write_text(report)
    print(report, end="")
    return EXIT_OK


def cmd_validate_hsf(args) -> int:
    paths = [Path(p) for p in args.paths]
    if args.manifest:
        index = load_manifest(args.manifest)
        paths.extend(index.root / r.path for r in index.records)
    if not paths:
        raise ConfigError("nothing to validate: pass file paths or --manifest")
    for p in paths:
        rows, cols = validate_hsf(p)
        print(f"ok  {p}  {rows}x{cols}")
    print(f"validated {len(paths)} files")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relish",
        description="Latent-state regression heads over frozen-backbone token states.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one method across seeds from a JSON run config")
    p.add_argument("config")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest split")
    p.add_argument("checkpoint")
    p.add_argument("manifest")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--gold-min", type=float, required=True)
    p.add_argument("--gold-max", type=float, required=True)
    p.add_argument("--dataset", default="dataset")
    p.add_argument("--backbone", default="backbone")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("params", help="trainable-value accounting")
    p.add_argument("--backbone-dim", type=int, default=None)
    p.add_argument("--head-dim", type=int, default=256)
    p.add_argument("--num-heads", type=int, default=8)
    p.add_argument("--num-blocks", type=int, default=3)
    p.add_argument("--ffn-hidden", type=int, default=None)
    p.add_argument(
        "--reference-table",
        action="store_true",
        help="print counts for the three reference backbone widths and verify them",
    )
    p.add_argument(
        "--mlp-match",
        nargs=2,
        type=int,
        metavar=("D", "TARGET"),
        help="matched MLP hidden width for backbone width D and value budget TARGET",
    )
    p.set_defaults(fn=cmd_params)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--backbone-dim", type=int, default=GRAD_SUITE_DEFAULTS["backbone_dim"])
    p.add_argument("--head-dim", type=int, default=GRAD_SUITE_DEFAULTS["head_dim"])
    p.add_argument("--num-heads", type=int, default=GRAD_SUITE_DEFAULTS["num_heads"])
    p.add_argument("--num-blocks", type=int, default=GRAD_SUITE_DEFAULTS["num_blocks"])
    p.add_argument(
        "--seq-lens", type=int, nargs="+", default=list(GRAD_SUITE_DEFAULTS["seq_lens"])
    )
    p.add_argument(
        "--corrupt",
        default=None,
        metavar="PARAM",
        help="test hook: flip the sign of this parameter's gradient; the check must fail",
    )
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("synth", help="materialize a deterministic synthetic dataset")
    p.add_argument("--task", choices=("planted", "ordinal"), default="planted")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEEDS[0])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seq-len", type=int, default=64)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--alpha", type=float, default=4.0)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--target-lo", type=float, default=0.0)
    p.add_argument("--target-hi", type=float, default=10.0)
    p.add_argument("--grid-lo", type=int, default=0)
    p.add_argument("--grid-hi", type=int, default=5)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--validate", action="store_true")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("ablate-depth", help="independent runs over refinement depths")
    p.add_argument("config")
    p.add_argument("--depths", default="1,2,3")
    p.set_defaults(fn=cmd_ablate_depth)

    p = sub.add_parser("ablate-loss", help="paired runs: huber objective vs plain squared error")
    p.add_argument("config")
    p.set_defaults(fn=cmd_ablate_loss)

    p = sub.add_parser("validate-hsf", help="strict validation of state files")
    p.add_argument("paths", nargs="*")
    p.add_argument("--manifest", default=None)
    p.set_defaults(fn=cmd_validate_hsf)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ParseError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, RelishError) as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
