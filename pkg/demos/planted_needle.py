#!/usr/bin/env python3
"""The core experiment at desk scale: one token per sequence carries the
target, everything else is noise.

Mean pooling divides the informative row by the sequence length before
a linear head ever sees it, so its correlation is capped well below 1.
The refinement head can attend straight to the marked row instead.
"""

import numpy as np

from relish import LinearHeadConfig, RelishConfig, TrainConfig, evaluate, train
from relish.data import PlantedSpec, assign_splits, planted_examples

spec = PlantedSpec(n=600, seq_len=16, dim=32, alpha=4.0, noise_std=1.0)
examples = planted_examples(spec, seed=42)
splits = assign_splits(spec.n, seed=42)
by_split = {
    name: [ex for ex, s in zip(examples, splits) if s == name]
    for name in ("train", "val", "test")
}
print(f"planted task: n={spec.n}, {spec.seq_len} tokens x {spec.dim} dims,"
      f" marker strength {spec.alpha}")
print(f"splits: {len(by_split['train'])}/{len(by_split['val'])}/{len(by_split['test'])}")

head = RelishConfig(backbone_dim=spec.dim, head_dim=16, num_heads=4, num_blocks=3)
relish_cfg = TrainConfig(method="relish", head=head, seed=42, lr=3e-3,
                         effective_batch=32, max_epochs=20, patience=3)
linear_cfg = TrainConfig(method="linear", head=LinearHeadConfig(spec.dim), seed=42,
                         lr=1e-2, effective_batch=32, max_epochs=20, patience=3)

results = {}
for name, cfg in (("refinement head", relish_cfg), ("mean-pool linear", linear_cfg)):
    result = train(cfg, by_split["train"], by_split["val"])
    record = evaluate(result, by_split["test"], dataset="planted", backbone="synth",
                      gold_range=(0.0, 10.0))
    results[name] = record
    print(f"{name:>16}: test pearson {record.pearson:.4f}, rmse {record.rmse:.4f}"
          f" (best epoch {result.history.best_epoch + 1})")

gap = results["refinement head"].pearson - results["mean-pool linear"].pearson
assert gap > 0.1
print(f"\nattending beats pooling by {gap:.3f} pearson on the same data and budget")

# the cap on pooling is structural: even exact least squares on the
# pooled vectors cannot recover the target
train_pool = np.stack([ex.states.mean(axis=0) for ex in by_split["train"]])
test_pool = np.stack([ex.states.mean(axis=0) for ex in by_split["test"]])
y_train = np.array([ex.target for ex in by_split["train"]])
y_test = np.array([ex.target for ex in by_split["test"]])
design = np.hstack([train_pool, np.ones((len(y_train), 1))])
coef, *_ = np.linalg.lstsq(design, y_train, rcond=None)
pred = np.hstack([test_pool, np.ones((len(y_test), 1))]) @ coef
r = np.corrcoef(pred, y_test)[0, 1]
print(f"exact OLS on pooled features: pearson {r:.4f} (the ceiling pooling pays for)")
