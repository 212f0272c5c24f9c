#!/usr/bin/env python3
"""The on-disk contract: one float32 matrix per file, one manifest per
dataset.  Any language that can write these 16 header bytes plus
little-endian rows can feed the trainer."""

import struct
import tempfile
from pathlib import Path

import numpy as np

from relish.data import (
    ManifestRecord,
    load_manifest,
    probe_hsf,
    read_hsf,
    write_hsf,
    write_manifest,
)

root = Path(tempfile.mkdtemp(prefix="state-files-"))

# write a 3x4 matrix and look at the raw bytes
m = np.arange(12, dtype=np.float32).reshape(3, 4)
write_hsf(root / "ex0.hsf", m)
raw = (root / "ex0.hsf").read_bytes()
magic, version, rows, cols = struct.unpack("<4sIII", raw[:16])
print(f"header: magic={magic} version={version} rows={rows} cols={cols}")
print(f"payload: {len(raw) - 16} bytes = rows*cols*4 = {rows * cols * 4}")
assert raw[16:] == m.tobytes()  # row-major float32, little endian, nothing else

back = read_hsf(root / "ex0.hsf")
assert back.tobytes() == m.tobytes()
print(f"round trip bit-exact; probe without payload read: {probe_hsf(root / 'ex0.hsf')}")

# a manifest is four tab-separated fields per line, paths relative to it
write_hsf(root / "ex1.hsf", np.ones((2, 4), dtype=np.float32))
write_hsf(root / "ex2.hsf", np.zeros((5, 4), dtype=np.float32))
write_manifest(root / "manifest.tsv", [
    ManifestRecord(id="ex0", path="ex0.hsf", target=1.5, split="train"),
    ManifestRecord(id="ex1", path="ex1.hsf", target=0.25, split="val"),
    ManifestRecord(id="ex2", path="ex2.hsf", target=4.0, split="test"),
])
print("\nmanifest.tsv:")
print((root / "manifest.tsv").read_text(), end="")

index = load_manifest(root / "manifest.tsv")
print(f"\nloaded: dim={index.dim}, split sizes {index.split_sizes()}")
example = index.load_example(index.split("train")[0])
print(f"first train example: id={example.id}, {example.seq_len}x{example.dim},"
      f" target {example.target}")

# loading is strict on purpose: a truncated file names itself
(root / "ex2.hsf").write_bytes((root / "ex2.hsf").read_bytes()[:-3])
try:
    load_manifest(root / "manifest.tsv")
except Exception as err:
    print(f"\ntruncating ex2.hsf -> {type(err).__name__}: {err}")
