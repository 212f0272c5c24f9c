"""Reverse-mode autodiff over 2-D arrays, AdamW, and gradient checking."""

from .gradcheck import GradCheckReport, grad_check, relative_error
from .optim import AdamWConfig, LrSchedule, OptimState, adamw_step
from .tensor import (
    MASKED_LOGIT,
    ParamStore,
    Tensor2,
    add,
    add_n,
    backward,
    concat_cols,
    constant,
    dropout,
    gelu,
    huber,
    layer_norm,
    masked_softmax,
    matmul,
    mean_all,
    relu,
    scale,
    slice_cols,
    squared_error,
    sub,
    sum_all,
    transpose,
)

__all__ = [
    "MASKED_LOGIT",
    "AdamWConfig",
    "GradCheckReport",
    "LrSchedule",
    "OptimState",
    "ParamStore",
    "Tensor2",
    "adamw_step",
    "add",
    "add_n",
    "backward",
    "concat_cols",
    "constant",
    "dropout",
    "gelu",
    "grad_check",
    "huber",
    "layer_norm",
    "masked_softmax",
    "matmul",
    "mean_all",
    "relative_error",
    "relu",
    "scale",
    "slice_cols",
    "squared_error",
    "sub",
    "sum_all",
    "transpose",
]
