"""Data layer: binary state files, manifests, synthetic tasks, batching."""

from .batching import Batch, epoch_order, make_batches
from .hsf import HEADER_SIZE, MAGIC, VERSION, probe_hsf, read_hsf, validate_hsf, write_hsf
from .manifest import (
    SPLITS,
    DatasetIndex,
    ManifestRecord,
    load_manifest,
    write_manifest,
)
from .synth import (
    OrdinalSpec,
    PlantedSpec,
    assign_splits,
    ordinal_examples,
    plant_directions,
    planted_examples,
    synth_backbone,
    write_dataset,
)

__all__ = [
    "HEADER_SIZE",
    "MAGIC",
    "SPLITS",
    "VERSION",
    "Batch",
    "DatasetIndex",
    "ManifestRecord",
    "OrdinalSpec",
    "PlantedSpec",
    "assign_splits",
    "epoch_order",
    "load_manifest",
    "make_batches",
    "ordinal_examples",
    "plant_directions",
    "planted_examples",
    "probe_hsf",
    "read_hsf",
    "synth_backbone",
    "validate_hsf",
    "write_dataset",
    "write_manifest",
]
