"""Iterative latent-state regression heads over frozen-LLM token states.

A numpy/scipy library: a taped autodiff core, the refinement head and
its pooled baselines, decision rules over candidate distributions,
evaluation metrics with seed-level aggregation, deterministic synthetic
data with a bit-exact state-file format, and a training harness.
"""

from .baselines import (
    LinearHeadConfig,
    MlpHeadConfig,
    linear_head_forward,
    masked_mean_pool,
    match_mlp_hidden,
    mlp_head_forward,
    mlp_param_count,
)
from .decisions import (
    GridDistribution,
    GridLogitConfig,
    SampleMean,
    ard_decode,
    grid_logit_forward,
    grid_predict,
    integer_grid,
    parse_numeric,
    raft_loss,
    rail_grid_mean,
    rail_sample_mean,
)
from .errors import RelishError
from .harness import (
    DEFAULT_SEEDS,
    EarlyStopping,
    TrainConfig,
    TrainHistory,
    TrainResult,
    ablate_depth,
    ablate_loss,
    evaluate,
    load_checkpoint,
    make_predictor,
    save_checkpoint,
    train,
)
from .head import (
    RelishConfig,
    TargetNormalizer,
    count_parameters,
    fit_normalizer,
    huber_loss,
    init_params,
    predict,
    project_tokens,
    refine_step,
    relish_forward,
)
from .metrics import (
    AggregateStat,
    RunRecord,
    average_ranks,
    format_metrics_table,
    macro_aggregate,
    nrmse,
    pearson,
    rmse,
    spearman,
)
from .rng import CounterRng, mix64
from .tokens import TokenStates

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_SEEDS",
    "AggregateStat",
    "CounterRng",
    "EarlyStopping",
    "GridDistribution",
    "GridLogitConfig",
    "LinearHeadConfig",
    "MlpHeadConfig",
    "RelishConfig",
    "RelishError",
    "RunRecord",
    "SampleMean",
    "TargetNormalizer",
    "TokenStates",
    "TrainConfig",
    "TrainHistory",
    "TrainResult",
    "ablate_depth",
    "ablate_loss",
    "ard_decode",
    "average_ranks",
    "count_parameters",
    "evaluate",
    "fit_normalizer",
    "format_metrics_table",
    "grid_logit_forward",
    "grid_predict",
    "huber_loss",
    "init_params",
    "integer_grid",
    "linear_head_forward",
    "load_checkpoint",
    "macro_aggregate",
    "make_predictor",
    "masked_mean_pool",
    "match_mlp_hidden",
    "mix64",
    "mlp_head_forward",
    "mlp_param_count",
    "nrmse",
    "parse_numeric",
    "pearson",
    "predict",
    "project_tokens",
    "raft_loss",
    "rail_grid_mean",
    "rail_sample_mean",
    "refine_step",
    "relish_forward",
    "rmse",
    "save_checkpoint",
    "spearman",
    "train",
]
