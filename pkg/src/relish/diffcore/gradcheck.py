"""Central-difference verification of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import GraphError
from .tensor import ParamStore, Tensor2, backward


@dataclass
class GradCheckReport:
    """Worst relative error per parameter plus the overall verdict."""

    worst: float
    per_param: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance


def relative_error(analytic: float, numeric: float, abs_floor: float = 0.0) -> float:
    """Relative gap, except that differences at or below abs_floor count
    as zero. Central differences at eps=1e-5 carry ~1e-11 rounding
    noise, so a floor slightly above that keeps structurally-zero
    gradients (for example a shared key bias, which shifts every
    attention logit equally and cancels in the softmax) from reading as
    100% error while still catching any real defect."""
    diff = abs(analytic - numeric)
    if diff <= abs_floor:
        return 0.0
    return diff / max(abs(analytic), abs(numeric), 1e-12)


def grad_check(
    loss_fn: Callable[[], Tensor2],
    params: ParamStore,
    *,
    eps: float = 1e-5,
    tolerance: float = 1e-4,
    abs_floor: float = 1e-8,
    max_entries_per_param: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    corrupt_param: Optional[str] = None,
) -> GradCheckReport:
    """Compare reverse-mode gradients against central finite differences.

    ``loss_fn`` must rebuild the 1x1 loss from the current parameter
    values on every call. Parameters must be double precision or the
    difference quotient drowns in rounding noise. When
    ``max_entries_per_param`` is given, that many entries are probed per
    parameter (chosen by ``rng``) instead of all of them.

    ``corrupt_param`` flips the sign of that parameter's analytic
    gradient before comparison. The check must then fail; it exists so a
    test of the checker itself can prove a wrong gradient gets caught.
    """
    for name, p in params.items():
        if p.value.dtype != np.float64:
            raise GraphError(f"grad_check needs double precision, {name!r} is {p.value.dtype}")
    if corrupt_param is not None and corrupt_param not in params:
        raise GraphError(f"corrupt_param {corrupt_param!r} is not a parameter")

    params.zero_grads()
    loss = loss_fn()
    backward(loss)
    analytic = {name: p.grad.copy() for name, p in params.items()}
    if corrupt_param is not None:
        analytic[corrupt_param] = -analytic[corrupt_param]

    per_param: dict[str, float] = {}
    for name, p in params.items():
        flat = p.value.reshape(-1)
        n = flat.size
        if max_entries_per_param is not None and n > max_entries_per_param:
            if rng is None:
                rng = np.random.default_rng(0)
            idx = rng.choice(n, size=max_entries_per_param, replace=False)
        else:
            idx = np.arange(n)
        worst = 0.0
        ana_flat = analytic[name].reshape(-1)
        for i in idx:
            keep = flat[i]
            flat[i] = keep + eps
            up = loss_fn().item()
            flat[i] = keep - eps
            down = loss_fn().item()
            flat[i] = keep
            numeric = (up - down) / (2.0 * eps)
            worst = max(worst, relative_error(float(ana_flat[i]), numeric, abs_floor))
        per_param[name] = worst
    params.zero_grads()
    return GradCheckReport(worst=max(per_param.values()), per_param=per_param, tolerance=tolerance)
