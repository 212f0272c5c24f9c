"""End-to-end command runs through main(argv), checking exit codes and artifacts."""

import json

import numpy as np
import pytest

from relish.cli import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OK, main
from relish.data import load_manifest, read_hsf


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def tree_bytes(root):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def synth_tiny(capsys, out_dir, seed=5, n=24):
    code, _, _ = run(
        capsys, "synth", "--task", "planted", "--out", str(out_dir),
        "--seed", str(seed), "--n", str(n), "--seq-len", "5", "--dim", "6",
        "--alpha", "3.0", "--noise-std", "0.5",
        "--train-frac", "0.6", "--val-frac", "0.2",
    )
    assert code == EXIT_OK
    return out_dir / "manifest.tsv"


def write_run_config(path, manifest, out_dir, method="linear", **extra):
    config = {
        "method": method,
        "manifest": str(manifest),
        "gold_range": [0.0, 10.0],
        "out_dir": str(out_dir),
        "seeds": [1],
        "train": {"lr": 0.01, "max_epochs": 2, "effective_batch": 8},
    }
    config.update(extra)
    path.write_text(json.dumps(config))
    return path


# ---------------------------------------------------------------------------
# params


def test_params_reference_table(capsys):
    code, out, _ = run(capsys, "params", "--reference-table")
    assert code == EXIT_OK
    assert "MISMATCH" not in out
    assert "3,418,625" in out and "3,680,769" in out and "3,746,305" in out
    assert "704" in out and "640" in out


def test_params_single_width(capsys):
    code, out, _ = run(capsys, "params", "--backbone-dim", "4096")
    assert code == EXIT_OK
    assert out.strip() == "3,418,625"


def test_params_mlp_match(capsys):
    code, out, _ = run(capsys, "params", "--mlp-match", "4096", "3418625")
    assert code == EXIT_OK
    assert "hidden=704" in out


def test_params_needs_a_mode(capsys):
    code, _, err = run(capsys, "params")
    assert code == EXIT_CONFIG
    assert "config error" in err


# ---------------------------------------------------------------------------
# synth + validate-hsf


def test_synth_writes_loadable_dataset(tmp_path, capsys):
    manifest = synth_tiny(capsys, tmp_path / "data")
    index = load_manifest(manifest)
    assert len(index.records) == 24
    assert index.dim == 6
    sizes = index.split_sizes()
    assert sizes["train"] >= sizes["val"] >= 1 and sizes["test"] >= 1


def test_synth_is_byte_reproducible(tmp_path, capsys):
    synth_tiny(capsys, tmp_path / "one")
    synth_tiny(capsys, tmp_path / "two")
    assert tree_bytes(tmp_path / "one") == tree_bytes(tmp_path / "two")


def test_synth_validate_flag(tmp_path, capsys):
    code, out, _ = run(
        capsys, "synth", "--out", str(tmp_path / "d"), "--n", "12",
        "--seq-len", "3", "--dim", "4", "--train-frac", "0.5", "--val-frac", "0.25",
        "--validate",
    )
    assert code == EXIT_OK
    assert "validated 12 state files" in out


def test_synth_ordinal_task(tmp_path, capsys):
    code, out, _ = run(
        capsys, "synth", "--task", "ordinal", "--out", str(tmp_path / "d"),
        "--n", "20", "--dim", "4", "--train-frac", "0.5", "--val-frac", "0.25",
    )
    assert code == EXIT_OK
    index = load_manifest(tmp_path / "d" / "manifest.tsv")
    targets = {r.target for r in index.records}
    assert targets <= {0.0, 1.0, 2.0, 3.0, 4.0, 5.0}


def test_synth_bad_fractions_exit_config(tmp_path, capsys):
    code, _, err = run(
        capsys, "synth", "--out", str(tmp_path / "d"), "--n", "10",
        "--seq-len", "2", "--dim", "4", "--train-frac", "0.9", "--val-frac", "0.5",
    )
    assert code == EXIT_CONFIG
    assert "config error" in err


def test_validate_hsf_happy_and_corrupt(tmp_path, capsys):
    manifest = synth_tiny(capsys, tmp_path / "data", n=12)
    code, out, _ = run(capsys, "validate-hsf", "--manifest", str(manifest))
    assert code == EXIT_OK
    assert "validated 12 files" in out

    victim = next((tmp_path / "data" / "states").glob("*.hsf"))
    victim.write_bytes(victim.read_bytes()[:-2])
    code, _, err = run(capsys, "validate-hsf", str(victim))
    assert code == EXIT_DATA
    assert "data error" in err


def test_validate_hsf_requires_input(capsys):
    code, _, err = run(capsys, "validate-hsf")
    assert code == EXIT_CONFIG
    assert "nothing to validate" in err


# ---------------------------------------------------------------------------
# train / eval


def test_train_writes_records_and_reruns_identically(tmp_path, capsys):
    manifest = synth_tiny(capsys, tmp_path / "data")
    config = write_run_config(tmp_path / "run.json", manifest, tmp_path / "out1")
    code, out, _ = run(capsys, "train", str(config))
    assert code == EXIT_OK
    assert "seed 1: best epoch" in out

    out1 = tmp_path / "out1"
    assert (out1 / "seed1.rck1").is_file()
    assert (out1 / "seed1.history.json").is_file()
    assert (out1 / "metrics.txt").read_text().startswith("metric")
    records = json.loads((out1 / "records.json").read_text())
    assert len(records) == 1
    assert set(records[0]) == {
        "dataset", "backbone", "method", "seed", "pearson", "spearman", "rmse", "nrmse",
    }

    config2 = write_run_config(tmp_path / "run2.json", manifest, tmp_path / "out2")
    assert run(capsys, "train", str(config2))[0] == EXIT_OK
    assert tree_bytes(out1) == tree_bytes(tmp_path / "out2")


def test_train_relish_method(tmp_path, capsys):
    manifest = synth_tiny(capsys, tmp_path / "data")
    config = write_run_config(
        tmp_path / "run.json", manifest, tmp_path / "out", method="relish",
        head={"head_dim": 8, "num_heads": 2, "num_blocks": 1, "ffn_hidden": 16},
    )
    code, _, _ = run(capsys, "train", str(config))
    assert code == EXIT_OK
    assert (tmp_path / "out" / "seed1.rck1").is_file()


def test_train_unknown_key_is_named(tmp_path, capsys):
    manifest = synth_tiny(capsys, tmp_path / "data")
    config = write_run_config(tmp_path / "run.json", manifest, tmp_path / "out")
    raw = json.loads(config.read_text())
    raw["train"]["lerning_rate"] = 0.1
    del raw["train"]["lr"]
    config.write_text(json.dumps(raw))
    code, _, err = run(capsys, "train", str(config))
    assert code == EXIT_CONFIG
    assert "lerning_rate" in err


def test_train_missing_manifest_exit_data(tmp_path, capsys):
    config = write_run_config(
        tmp_path / "run.json", tmp_path / "nope.tsv", tmp_path / "out"
    )
    code, _, err = run(capsys, "train", str(config))
    assert code == EXIT_DATA
    assert "does not exist" in err


def test_train_invalid_json_exit_config(tmp_path, capsys):
    bad = tmp_path / "run.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "train", str(bad))
    assert code == EXIT_CONFIG


def test_train_missing_required_key(tmp_path, capsys):
    bad = tmp_path / "run.json"
    bad.write_text(json.dumps({"method": "linear"}))
    code, _, err = run(capsys, "train", str(bad))
    assert code == EXIT_CONFIG
    assert "required" in err


def test_eval_checkpoint(tmp_path, capsys):
    manifest = synth_tiny(capsys, tmp_path / "data")
    config = write_run_config(tmp_path / "run.json", manifest, tmp_path / "out")
    assert run(capsys, "train", str(config))[0] == EXIT_OK
    out_json = tmp_path / "eval.json"
    code, out, _ = run(
        capsys, "eval", str(tmp_path / "out" / "seed1.rck1"), str(manifest),
        "--split", "val", "--gold-min", "0", "--gold-max", "10",
        "--out", str(out_json),
    )
    assert code == EXIT_OK
    rec = json.loads(out_json.read_text())
    assert rec["method"] == "linear" and rec["seed"] == 1
    assert json.loads(out)["rmse"] == rec["rmse"]


def test_eval_missing_checkpoint(tmp_path, capsys):
    manifest = synth_tiny(capsys, tmp_path / "data", n=12)
    code, _, err = run(
        capsys, "eval", str(tmp_path / "none.rck1"), str(manifest),
        "--gold-min", "0", "--gold-max", "10",
    )
    assert code == EXIT_DATA
    assert "does not exist" in err


# ---------------------------------------------------------------------------
# gradcheck


def test_gradcheck_small_passes(capsys):
    code, out, _ = run(
        capsys, "gradcheck", "--backbone-dim", "8", "--head-dim", "8",
        "--num-heads", "2", "--num-blocks", "1", "--seq-lens", "1", "3",
    )
    assert code == EXIT_OK
    assert "all gradient checks passed" in out
    assert "FAIL" not in out


def test_gradcheck_corrupt_param_fails_and_is_named(capsys):
    code, out, _ = run(
        capsys, "gradcheck", "--backbone-dim", "8", "--head-dim", "8",
        "--num-heads", "2", "--num-blocks", "1", "--seq-lens", "3",
        "--corrupt", "block0.attn.Wq",
    )
    assert code == EXIT_NUMERIC
    assert "FAIL" in out
    assert "block0.attn.Wq" in out
    assert "injected corruption" in out


def test_gradcheck_unknown_corrupt_param(capsys):
    code, _, err = run(
        capsys, "gradcheck", "--backbone-dim", "8", "--head-dim", "8",
        "--num-heads", "2", "--num-blocks", "1", "--seq-lens", "1",
        "--corrupt", "no.such.param",
    )
    assert code == EXIT_NUMERIC
    assert "does not exist" in err


# ---------------------------------------------------------------------------
# ablations


def test_ablate_depth_cli(tmp_path, capsys):
    manifest = synth_tiny(capsys, tmp_path / "data")
    config = write_run_config(
        tmp_path / "run.json", manifest, tmp_path / "out", method="relish",
        head={"head_dim": 8, "num_heads": 2, "num_blocks": 1, "ffn_hidden": 16},
        train={"lr": 0.01, "max_epochs": 1, "effective_batch": 8},
    )
    code, out, _ = run(capsys, "ablate-depth", str(config), "--depths", "1,2")
    assert code == EXIT_OK
    assert "single-pass attention-pooling baseline" in out
    records = json.loads((tmp_path / "out" / "depth_records.json").read_text())
    assert {r["method"] for r in records} == {"relish-L1", "relish-L2"}
    assert (tmp_path / "out" / "depth_report.txt").is_file()


def test_ablate_loss_cli(tmp_path, capsys):
    manifest = synth_tiny(capsys, tmp_path / "data")
    config = write_run_config(
        tmp_path / "run.json", manifest, tmp_path / "out", method="relish",
        head={"head_dim": 8, "num_heads": 2, "num_blocks": 1, "ffn_hidden": 16},
        train={"lr": 0.01, "max_epochs": 1, "effective_batch": 8},
    )
    code, out, _ = run(capsys, "ablate-loss", str(config))
    assert code == EXIT_OK
    assert "pearson gap between losses" in out
    records = json.loads((tmp_path / "out" / "loss_records.json").read_text())
    assert {r["method"] for r in records} == {"relish-huber", "relish-mse"}


def test_ablate_depth_rejects_non_relish(tmp_path, capsys):
    manifest = synth_tiny(capsys, tmp_path / "data", n=12)
    config = write_run_config(tmp_path / "run.json", manifest, tmp_path / "out")
    code, _, err = run(capsys, "ablate-depth", str(config))
    assert code == EXIT_CONFIG
    assert "requires method relish" in err


# ---------------------------------------------------------------------------
# config plumbing


def test_relative_paths_resolve_against_config(tmp_path, capsys):
    synth_tiny(capsys, tmp_path / "data")
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "method": "linear",
        "manifest": "data/manifest.tsv",
        "gold_range": [0.0, 10.0],
        "out_dir": "out",
        "seeds": [1],
        "train": {"lr": 0.01, "max_epochs": 1, "effective_batch": 8},
    }))
    assert run(capsys, "train", str(config))[0] == EXIT_OK
    assert (tmp_path / "out" / "records.json").is_file()


def test_gold_range_validation(tmp_path, capsys):
    manifest = synth_tiny(capsys, tmp_path / "data", n=12)
    config = write_run_config(tmp_path / "run.json", manifest, tmp_path / "out",
                              gold_range=[5.0, 5.0])
    code, _, err = run(capsys, "train", str(config))
    assert code == EXIT_CONFIG
    assert "gold_range" in err
