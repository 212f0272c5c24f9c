"""The standard finite-difference verification suite.

One place builds every gradient check so the command-line report and
the test suite exercise identical cases: the full refinement head at a
tiny double-precision config across several sequence lengths, both
pooled baseline heads, and the grid-expectation objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import baselines, decisions
from . import diffcore as dc
from .baselines import LinearHeadConfig, MlpHeadConfig
from .decisions import GridLogitConfig, integer_grid
from .diffcore import grad_check
from .errors import GraphError
from .head import RelishConfig, init_params, relish_forward
from .rng import CounterRng
from .tokens import TokenStates

GRAD_SUITE_DEFAULTS = {
    "backbone_dim": 32,
    "head_dim": 16,
    "num_heads": 4,
    "num_blocks": 2,
    "seq_lens": (1, 7, 16),
}

HEAD_TOL = 1e-4
BASELINE_TOL = 1e-6
_PROBES_PER_PARAM = 40
_INPUT_SEED = 7


@dataclass
class SuiteReport:
    rows: list[tuple[str, float, float, bool]] = field(default_factory=list)
    failure: str = ""

    @property
    def passed(self) -> bool:
        return all(ok for _, _, _, ok in self.rows)

    def add(self, name: str, report, corrupt: Optional[str]) -> None:
        self.rows.append((name, report.worst, report.tolerance, report.passed))
        if not report.passed and not self.failure:
            worst_param = max(report.per_param, key=report.per_param.get)
            suffix = " (injected corruption)" if corrupt else ""
            self.failure = (
                f"{name}: parameter {worst_param!r} off by {report.worst:.3e}{suffix}"
            )


def _example_tokens(seq_len: int, dim: int, masked_tail: int = 0) -> TokenStates:
    states = CounterRng(_INPUT_SEED, seq_len).normal_matrix(seq_len, dim)
    mask = np.ones(seq_len, dtype=np.uint8)
    if masked_tail:
        mask[-masked_tail:] = 0
    return TokenStates(states=states, mask=mask, id=f"gc-s{seq_len}")


def run_grad_suite(
    *,
    backbone_dim: int = GRAD_SUITE_DEFAULTS["backbone_dim"],
    head_dim: int = GRAD_SUITE_DEFAULTS["head_dim"],
    num_heads: int = GRAD_SUITE_DEFAULTS["num_heads"],
    num_blocks: int = GRAD_SUITE_DEFAULTS["num_blocks"],
    seq_lens: tuple[int, ...] = GRAD_SUITE_DEFAULTS["seq_lens"],
    corrupt_param: Optional[str] = None,
) -> SuiteReport:
    """Run every check in double precision and collect a report.

    corrupt_param flips the sign of that parameter's analytic gradient
    in the refinement-head cases; a correct checker must then fail and
    name the parameter.
    """
    suite = SuiteReport()
    probe_rng = np.random.default_rng(0)

    config = RelishConfig(
        backbone_dim=backbone_dim,
        head_dim=head_dim,
        num_heads=num_heads,
        num_blocks=num_blocks,
        dropout=0.0,
    )
    params = init_params(config, seed=11, dtype=np.float64)
    if corrupt_param is not None and corrupt_param not in params:
        raise GraphError(f"corrupt parameter {corrupt_param!r} does not exist in the head")
    for seq_len in seq_lens:
        for loss_name in ("huber", "mse"):
            tokens = _example_tokens(seq_len, backbone_dim, masked_tail=2 if seq_len > 4 else 0)
            base_pred = relish_forward(tokens, params, config).item()
            # keep the residual well inside the quadratic region so the
            # probe never crosses the huber knee
            target = base_pred - 0.37
            if loss_name == "huber":
                loss_fn = lambda: dc.huber(relish_forward(tokens, params, config), target, 1.0)
            else:
                loss_fn = lambda: dc.squared_error(
                    relish_forward(tokens, params, config), target
                )
            report = grad_check(
                loss_fn,
                params,
                tolerance=HEAD_TOL,
                max_entries_per_param=_PROBES_PER_PARAM,
                rng=probe_rng,
                corrupt_param=corrupt_param,
            )
            suite.add(f"refinement-head S={seq_len} {loss_name}", report, corrupt_param)

    pooled_np = CounterRng(_INPUT_SEED, 101).normal_matrix(1, backbone_dim)
    pooled = dc.Tensor2(pooled_np)

    linear_params = baselines.init_linear_params(
        LinearHeadConfig(backbone_dim), seed=11, dtype=np.float64
    )
    lin_target = baselines.linear_head_forward(pooled, linear_params).item() - 0.37
    report = grad_check(
        lambda: dc.huber(baselines.linear_head_forward(pooled, linear_params), lin_target, 1.0),
        linear_params,
        tolerance=BASELINE_TOL,
    )
    suite.add("linear-head", report, None)

    mlp_config = MlpHeadConfig(backbone_dim=backbone_dim, hidden=8, dropout=0.0)
    mlp_params = baselines.init_mlp_params(mlp_config, seed=11, dtype=np.float64)
    mlp_target = baselines.mlp_head_forward(pooled, mlp_params, mlp_config).item() - 0.37
    report = grad_check(
        lambda: dc.huber(
            baselines.mlp_head_forward(pooled, mlp_params, mlp_config), mlp_target, 1.0
        ),
        mlp_params,
        tolerance=BASELINE_TOL,
    )
    suite.add("mlp-head", report, None)

    grid_config = GridLogitConfig(feature_dim=backbone_dim, grid=integer_grid(0, 5))
    grid_params = decisions.init_grid_logit_params(grid_config, seed=11, dtype=np.float64)
    report = grad_check(
        lambda: decisions.raft_loss_graph(pooled, 3.2, grid_params, grid_config),
        grid_params,
        tolerance=BASELINE_TOL,
    )
    suite.add("grid-expectation-objective", report, None)

    return suite
