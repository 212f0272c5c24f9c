"""Dense 2-D tensors with taped reverse-mode differentiation.

Every value is a rows x cols matrix; vectors are 1 x n. Each operation
records its inputs and a per-input gradient closure, so calling
:func:`backward` on a 1x1 loss fills the gradient slots of every
reachable parameter. Outputs of public operations are checked finite.

Training math runs in single precision, verification in double; an
operation never mixes the two silently.
"""

from __future__ import annotations

from typing import Callable, Iterator, Optional, Sequence

import numpy as np
from scipy.special import erf

from ..errors import EmptySupportError, GraphError, NonFiniteError, ShapeError

# Finite stand-in for -inf on masked logits: survives max-subtraction
# without NaN from inf - inf.
MASKED_LOGIT = -1e30

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)

GradFn = Optional[Callable[[np.ndarray], np.ndarray]]


def _as_matrix(value, dtype=None) -> np.ndarray:
    arr = np.asarray(value, dtype=dtype)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got ndim={arr.ndim}")
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    return arr


class Tensor2:
    """One node of the computation graph holding a rows x cols matrix."""

    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_grad_fns")

    def __init__(
        self,
        value,
        *,
        requires_grad: bool = False,
        name: str = "",
        _parents: tuple["Tensor2", ...] = (),
        _grad_fns: tuple[GradFn, ...] = (),
    ):
        self.value = _as_matrix(value)
        if not np.isfinite(self.value).all():
            raise NonFiniteError(f"non-finite entries in tensor {name or '<anon>'}")
        self.requires_grad = requires_grad
        self.name = name
        self.grad: Optional[np.ndarray] = (
            np.zeros_like(self.value) if requires_grad and not _parents else None
        )
        self._parents = _parents
        self._grad_fns = _grad_fns

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    @property
    def data(self) -> np.ndarray:
        """Entries in row-major order."""
        return self.value.reshape(-1)

    @property
    def precision(self) -> str:
        return "single" if self.value.dtype == np.float32 else "double"

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.value.shape}")
        return float(self.value[0, 0])

    def __repr__(self) -> str:
        tag = f" '{self.name}'" if self.name else ""
        return f"Tensor2{tag}({self.rows}x{self.cols}, {self.precision})"


def constant(value, dtype=np.float32, name: str = "") -> Tensor2:
    """Wrap an array as a non-trainable graph input."""
    return Tensor2(_as_matrix(value, dtype=dtype), name=name)


def _child(value: np.ndarray, parents: Sequence[Tensor2], grad_fns: Sequence[GradFn]) -> Tensor2:
    needs = any(p.requires_grad for p in parents)
    fns = tuple(fn if p.requires_grad else None for p, fn in zip(parents, grad_fns))
    return Tensor2(value, requires_grad=needs, _parents=tuple(parents), _grad_fns=fns)


def _check_same_dtype(*tensors: Tensor2) -> None:
    dtypes = {t.value.dtype for t in tensors}
    if len(dtypes) > 1:
        raise ShapeError(f"mixed precisions in one op: {sorted(str(d) for d in dtypes)}")


# ---------------------------------------------------------------------------
# primitive operations


def matmul(a: Tensor2, b: Tensor2) -> Tensor2:
    """Matrix product a @ b."""
    if a.cols != b.rows:
        raise ShapeError(f"matmul: inner dims differ ({a.rows}x{a.cols} @ {b.rows}x{b.cols})")
    _check_same_dtype(a, b)
    return _child(
        a.value @ b.value,
        (a, b),
        (lambda g, bv=b.value: g @ bv.T, lambda g, av=a.value: av.T @ g),
    )


def add(a: Tensor2, b: Tensor2) -> Tensor2:
    """Elementwise sum; a 1 x n operand broadcasts over the other's rows."""
    return _add_like(a, b, sign=1.0)


def sub(a: Tensor2, b: Tensor2) -> Tensor2:
    return _add_like(a, b, sign=-1.0)


def _add_like(a: Tensor2, b: Tensor2, sign: float) -> Tensor2:
    _check_same_dtype(a, b)
    if a.value.shape == b.value.shape:
        pass
    elif b.rows == 1 and b.cols == a.cols:
        pass
    elif a.rows == 1 and a.cols == b.cols:
        pass
    else:
        raise ShapeError(f"add: incompatible shapes {a.value.shape} vs {b.value.shape}")

    def grad_for(t: Tensor2, flip: bool):
        def fn(g, shape=t.value.shape):
            out = -g if flip else g
            if shape[0] == 1 and g.shape[0] > 1:
                out = out.sum(axis=0, keepdims=True)
            return out

        return fn

    value = a.value + sign * b.value
    return _child(value, (a, b), (grad_for(a, False), grad_for(b, sign < 0)))


def scale(a: Tensor2, factor: float) -> Tensor2:
    c = a.value.dtype.type(factor)
    return _child(a.value * c, (a,), (lambda g: g * c,))


def transpose(a: Tensor2) -> Tensor2:
    return _child(a.value.T.copy(), (a,), (lambda g: g.T,))


def slice_cols(a: Tensor2, start: int, stop: int) -> Tensor2:
    if not (0 <= start < stop <= a.cols):
        raise ShapeError(f"slice_cols[{start}:{stop}] out of range for {a.cols} cols")

    def fn(g, shape=a.value.shape, lo=start, hi=stop):
        out = np.zeros(shape, dtype=g.dtype)
        out[:, lo:hi] = g
        return out

    return _child(a.value[:, start:stop].copy(), (a,), (fn,))


def concat_cols(parts: Sequence[Tensor2]) -> Tensor2:
    if not parts:
        raise ShapeError("concat_cols: empty input")
    rows = parts[0].rows
    if any(p.rows != rows for p in parts):
        raise ShapeError("concat_cols: row counts differ")
    _check_same_dtype(*parts)
    offsets = np.cumsum([0] + [p.cols for p in parts])
    fns = [
        (lambda g, lo=offsets[i], hi=offsets[i + 1]: g[:, lo:hi])
        for i in range(len(parts))
    ]
    return _child(np.concatenate([p.value for p in parts], axis=1), tuple(parts), fns)


def masked_softmax(logits: Tensor2, mask: np.ndarray) -> Tensor2:
    """Row-wise softmax restricted to positions where mask is nonzero.

    Masked positions come out exactly 0; the rest are positive and sum
    to 1 per row. Stabilized by max-subtraction after masked entries are
    replaced with a large negative finite value.
    """
    mask = np.asarray(mask)
    if mask.ndim != 1 or mask.shape[0] != logits.cols:
        raise ShapeError(f"mask length {mask.shape} does not match {logits.cols} columns")
    keep = mask != 0
    if not keep.any():
        raise EmptySupportError("masked_softmax: every position is masked")
    x = np.where(keep, logits.value, logits.value.dtype.type(MASKED_LOGIT))
    x = x - x.max(axis=1, keepdims=True)
    e = np.exp(x)
    e[:, ~keep] = 0.0
    probs = e / e.sum(axis=1, keepdims=True)

    def fn(g, p=probs):
        inner = (g * p).sum(axis=1, keepdims=True)
        return p * (g - inner)

    return _child(probs, (logits,), (fn,))


def layer_norm(x: Tensor2, gamma: Tensor2, beta: Tensor2, eps: float = 1e-5) -> Tensor2:
    """Row-wise normalization with population variance, then affine."""
    if eps <= 0:
        raise ShapeError("layer_norm: eps must be positive")
    n = x.cols
    if gamma.value.shape != (1, n) or beta.value.shape != (1, n):
        raise ShapeError("layer_norm: gamma/beta must be 1 x n")
    _check_same_dtype(x, gamma, beta)
    mean = x.value.mean(axis=1, keepdims=True)
    var = x.value.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + x.value.dtype.type(eps))
    xhat = (x.value - mean) * inv

    def grad_x(g, xh=xhat, iv=inv, gm=gamma.value, nn=n):
        h = g * gm
        return (h - h.mean(axis=1, keepdims=True) - xh * (h * xh).mean(axis=1, keepdims=True)) * iv

    def grad_gamma(g, xh=xhat):
        return (g * xh).sum(axis=0, keepdims=True)

    def grad_beta(g):
        return g.sum(axis=0, keepdims=True)

    return _child(gamma.value * xhat + beta.value, (x, gamma, beta), (grad_x, grad_gamma, grad_beta))


def gelu(x: Tensor2) -> Tensor2:
    """Exact Gaussian-CDF GELU, x * Phi(x)."""
    xv = x.value
    cdf = 0.5 * (1.0 + erf(xv * _INV_SQRT2))

    def fn(g, xv=xv, cdf=cdf):
        pdf = np.exp(-0.5 * xv * xv) * _INV_SQRT2PI
        return g * (cdf + xv * pdf)

    return _child((xv * cdf).astype(xv.dtype), (x,), (fn,))


def relu(x: Tensor2) -> Tensor2:
    keep = x.value > 0
    return _child(np.where(keep, x.value, 0.0).astype(x.value.dtype), (x,), (lambda g: g * keep,))


def dropout(x: Tensor2, rate: float, rng: np.random.Generator) -> Tensor2:
    """Inverted dropout with a mask drawn from rng; identity when rate=0."""
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"dropout rate {rate} outside [0, 1)")
    if rate == 0.0:
        return x
    keep = (rng.random(x.value.shape) >= rate) / x.value.dtype.type(1.0 - rate)
    keep = keep.astype(x.value.dtype)
    return _child(x.value * keep, (x,), (lambda g: g * keep,))


def sum_all(x: Tensor2) -> Tensor2:
    def fn(g, shape=x.value.shape):
        return np.full(shape, g[0, 0], dtype=g.dtype)

    return _child(np.array([[x.value.sum()]], dtype=x.value.dtype), (x,), (fn,))


def mean_all(x: Tensor2) -> Tensor2:
    return scale(sum_all(x), 1.0 / x.value.size)


def huber(pred: Tensor2, target: float, delta: float) -> Tensor2:
    """Huber penalty of a 1x1 prediction against a scalar target."""
    if pred.value.shape != (1, 1):
        raise ShapeError("huber: prediction must be 1x1")
    if delta <= 0:
        raise ShapeError("huber: delta must be positive")
    r = float(pred.value[0, 0]) - target
    if abs(r) <= delta:
        value, slope = 0.5 * r * r, r
    else:
        value, slope = delta * (abs(r) - 0.5 * delta), delta * np.sign(r)

    def fn(g, s=slope):
        return g * s

    return _child(np.array([[value]], dtype=pred.value.dtype), (pred,), (fn,))


def squared_error(pred: Tensor2, target: float) -> Tensor2:
    if pred.value.shape != (1, 1):
        raise ShapeError("squared_error: prediction must be 1x1")
    r = float(pred.value[0, 0]) - target
    return _child(np.array([[r * r]], dtype=pred.value.dtype), (pred,), (lambda g: g * (2.0 * r),))


def add_n(terms: Sequence[Tensor2]) -> Tensor2:
    """Sum of same-shape tensors; used to pool per-example losses."""
    if not terms:
        raise ShapeError("add_n: empty input")
    shape = terms[0].value.shape
    if any(t.value.shape != shape for t in terms):
        raise ShapeError("add_n: shapes differ")
    _check_same_dtype(*terms)
    total = terms[0].value.copy()
    for t in terms[1:]:
        total += t.value
    return _child(total, tuple(terms), tuple(lambda g: g for _ in terms))


# ---------------------------------------------------------------------------
# reverse pass


def _toposort(root: Tensor2) -> list[Tensor2]:
    order: list[Tensor2] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor2, Iterator[Tensor2]]] = [(root, iter(root._parents))]
    on_path: set[int] = {id(root)}
    while stack:
        node, parents = stack[-1]
        nxt = next(parents, None)
        if nxt is None:
            stack.pop()
            on_path.discard(id(node))
            seen.add(id(node))
            order.append(node)
        elif id(nxt) not in seen:
            if id(nxt) in on_path:
                raise GraphError("cycle detected in computation graph")
            on_path.add(id(nxt))
            stack.append((nxt, iter(nxt._parents)))
    return order


def backward(loss: Tensor2) -> None:
    """Accumulate d(loss)/d(param) into every reachable leaf's grad slot.

    Repeated calls without zeroing the slots accumulate, which is what
    gradient accumulation over micro-batches relies on.
    """
    if loss.value.shape != (1, 1):
        raise GraphError(f"backward: loss must be 1x1, got {loss.value.shape}")
    if not np.isfinite(loss.value[0, 0]):
        raise NonFiniteError("backward: loss is not finite")
    order = _toposort(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1), dtype=loss.value.dtype)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            if node.requires_grad:
                node.grad += g
            continue
        for parent, fn in zip(node._parents, node._grad_fns):
            if fn is None:
                continue
            contrib = fn(g)
            prev = grads.get(id(parent))
            grads[id(parent)] = contrib if prev is None else prev + contrib


# ---------------------------------------------------------------------------
# parameter store


class ParamStore:
    """Named trainable leaves, each with a same-shape gradient slot."""

    def __init__(self):
        self._params: dict[str, Tensor2] = {}

    def add(self, name: str, value, dtype=np.float32) -> Tensor2:
        if name in self._params:
            raise GraphError(f"duplicate parameter name {name!r}")
        t = Tensor2(_as_matrix(value, dtype=dtype), requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor2:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def num_values(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def load(self, values: dict[str, np.ndarray]) -> None:
        if set(values) != set(self._params):
            raise GraphError("snapshot names do not match parameter names")
        for name, arr in values.items():
            p = self._params[name]
            if arr.shape != p.value.shape:
                raise ShapeError(f"snapshot shape mismatch for {name!r}")
            p.value[...] = arr

    def check_finite(self) -> None:
        for name, p in self._params.items():
            if not np.isfinite(p.value).all():
                raise NonFiniteError(f"parameter {name!r} became non-finite")
