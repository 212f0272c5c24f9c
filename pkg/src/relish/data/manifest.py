"""Dataset manifests: newline-delimited id / path / target / split rows.

Fields are tab-separated; paths are relative to the manifest's own
directory. Loading is strict: duplicate ids, unknown splits, dangling
paths, and mixed state widths all fail with the offending line or file
named.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..errors import ManifestError
from ..tokens import TokenStates
from .hsf import probe_hsf, read_hsf

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    path: str
    target: float
    split: str


@dataclass(frozen=True)
class DatasetIndex:
    """Parsed manifest plus the directory paths resolve against."""

    root: Path
    records: tuple[ManifestRecord, ...]
    dim: int

    def split(self, name: str) -> tuple[ManifestRecord, ...]:
        if name not in SPLITS:
            raise ManifestError(f"unknown split {name!r}, expected one of {SPLITS}")
        return tuple(r for r in self.records if r.split == name)

    def split_sizes(self) -> dict[str, int]:
        return {name: len(self.split(name)) for name in SPLITS}

    def load_example(self, record: ManifestRecord) -> TokenStates:
        states = read_hsf(self.root / record.path)
        return TokenStates.dense(states, id=record.id, target=record.target)

    def load_split(self, name: str) -> list[TokenStates]:
        return [self.load_example(r) for r in self.split(name)]


def write_manifest(path, records) -> None:
    lines = []
    for r in records:
        for field in (r.id, r.path):
            if "\t" in field or "\n" in field:
                raise ManifestError(f"field {field!r} contains a tab or newline")
        lines.append(f"{r.id}\t{r.path}\t{r.target!r}\t{r.split}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_manifest(path) -> DatasetIndex:
    p = Path(path)
    if not p.is_file():
        raise ManifestError(f"manifest {p} does not exist")
    root = p.parent
    records: list[ManifestRecord] = []
    seen_ids: set[str] = set()
    dim: int | None = None
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ManifestError(f"{p}:{lineno}: expected 4 tab-separated fields, got {len(fields)}")
        rid, rel, target_text, split = fields
        if rid in seen_ids:
            raise ManifestError(f"{p}:{lineno}: duplicate id {rid!r}")
        seen_ids.add(rid)
        if split not in SPLITS:
            raise ManifestError(f"{p}:{lineno}: unknown split {split!r}")
        try:
            target = float(target_text)
        except ValueError:
            raise ManifestError(f"{p}:{lineno}: target {target_text!r} is not a number") from None
        full = root / rel
        if not full.is_file():
            raise ManifestError(f"{p}:{lineno}: state file {full} does not exist")
        _, cols = probe_hsf(full)
        if dim is None:
            dim = cols
        elif cols != dim:
            raise ManifestError(
                f"{p}:{lineno}: state width {cols} differs from earlier width {dim}"
            )
        records.append(ManifestRecord(id=rid, path=rel, target=target, split=split))
    if not records:
        raise ManifestError(f"{p}: manifest has no records")
    return DatasetIndex(root=root, records=tuple(records), dim=dim)
