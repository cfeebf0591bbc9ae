"""Dense float64 tensors with define-by-run reverse-mode differentiation.

Only the operations the training losses need are provided. Every operation
returns a new :class:`Tensor` that remembers its inputs and a closure mapping
the output gradient to input gradients; :func:`backward` walks that graph in
reverse topological order.

Shapes are restricted to scalars, vectors and matrices. Broadcasting is
limited to adding a bias vector to every row of a matrix.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

LOG_FLOOR = 1e-12


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class DegenerateVectorError(ValueError):
    """Raised when a zero-norm vector enters a cosine similarity."""


class Tensor:
    """A float64 array that may sit in a differentiation graph.

    Leaves created with ``requires_grad=True`` are parameters: after
    :func:`backward` their ``grad`` attribute holds the gradient of the loss.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim > 2:
            raise DimensionError(f"tensors are at most 2-D, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self.op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> Tensor:
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(_as_tensor(other), scale(self, -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward, op: str) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    out.op = op
    return out


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every reachable tensor that requires it.

    Gradients accumulate into existing ``grad`` buffers, so callers zero
    parameters between steps.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# elementwise and structural operations


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may be a bias vector added to each row of ``a``."""
    if a.shape == b.shape:
        return _make(a.data + b.data, (a, b), lambda g: (g, g), "add")
    if a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        return _make(a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0)), "add_row")
    if b.size == 1 and b.data.ndim == 0:
        return _make(a.data + b.data, (a, b), lambda g: (g, np.asarray(g.sum())), "add_scalar")
    if a.size == 1 and a.data.ndim == 0:
        return add(b, a)
    raise DimensionError(f"cannot add shapes {a.shape} and {b.shape}")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"elementwise multiply needs equal shapes, got {a.shape} and {b.shape}")
    return _make(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return _make(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"transpose needs a matrix, got shape {a.shape}")
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,), "transpose")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise ValueError("log of a non-positive value")
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def total(a: Tensor) -> Tensor:
    """Sum of all entries, as a scalar."""
    return _make(np.asarray(a.data.sum()), (a,), lambda g: (np.full_like(a.data, g),), "sum")


def mean_rows(a: Tensor) -> Tensor:
    """Mean over rows: ``m×n -> n``; a vector input reduces to a scalar."""
    n = a.shape[0]
    if n == 0:
        raise DimensionError("mean over zero rows")
    out = a.data.mean(axis=0)
    if a.data.ndim == 2:
        return _make(out, (a,), lambda g: (np.broadcast_to(g / n, a.shape).copy(),), "mean_rows")
    return _make(np.asarray(out), (a,), lambda g: (np.full(a.shape, g / n),), "mean_rows")


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack matrices (or vectors, as single rows) on top of each other."""
    mats = [p.data if p.data.ndim == 2 else p.data.reshape(1, -1) for p in parts]
    widths = {m.shape[1] for m in mats}
    if len(widths) != 1:
        raise DimensionError(f"concat_rows width mismatch: {[m.shape for m in mats]}")
    bounds = np.cumsum([0] + [m.shape[0] for m in mats])

    def back(g):
        return [g[bounds[i]:bounds[i + 1]].reshape(p.shape) for i, p in enumerate(parts)]

    return _make(np.concatenate(mats, axis=0), tuple(parts), back, "concat_rows")


def take_rows(a: Tensor, idx) -> Tensor:
    """Gather rows ``a[idx]``; repeated indices accumulate in the backward pass."""
    idx = np.asarray(idx, dtype=np.intp)

    def back(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        return (ga,)

    return _make(a.data[idx], (a,), back, "take_rows")


def diagonal(a: Tensor) -> Tensor:
    n = min(a.shape)

    def back(g):
        ga = np.zeros_like(a.data)
        ga[np.arange(n), np.arange(n)] = g
        return (ga,)

    return _make(np.diagonal(a.data).copy(), (a,), back, "diagonal")


def masked_row_logsumexp(a: Tensor, mask: np.ndarray, axis: int = 1) -> Tensor:
    """``log Σ_j mask_ij exp(a_ij)`` along ``axis``; every slice needs one active entry."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match {a.shape}")
    if not np.all(mask.any(axis=axis)):
        raise ValueError("logsumexp over an empty slice")
    shifted = np.where(mask, a.data, -np.inf)
    m = shifted.max(axis=axis, keepdims=True)
    w = np.where(mask, np.exp(shifted - m), 0.0)
    s = w.sum(axis=axis, keepdims=True)
    out = (np.log(s) + m).squeeze(axis)
    soft = w / s
    return _make(out, (a,), lambda g: (soft * np.expand_dims(g, axis),), "masked_logsumexp")


# ---------------------------------------------------------------------------
# probabilistic heads and losses


def softmax_rows(a: Tensor) -> Tensor:
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return _make(p, (a,), back, "softmax_rows")


def _check_targets(pred: Tensor, target: np.ndarray) -> np.ndarray:
    target = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if target.shape != pred.shape:
        raise DimensionError(f"prediction shape {pred.shape} does not match target {target.shape}")
    return target


def cross_entropy(pred_probs: Tensor, target_probs, weights: np.ndarray | None = None) -> Tensor:
    """Mean over rows of ``-Σ target·log(pred + 1e-12)``.

    Targets are constants. With ``weights`` the per-row terms are multiplied
    by them before averaging over *all* rows (used for confidence masking).
    """
    target = _check_targets(pred_probs, target_probs)
    if target.ndim != 2:
        raise DimensionError("cross_entropy expects matrices")
    if not np.allclose(target.sum(axis=1), 1.0, rtol=0.0, atol=1e-8):
        raise ValueError("cross_entropy target rows must sum to 1")
    m = target.shape[0]
    w = np.ones(m) if weights is None else np.asarray(weights, dtype=np.float64)
    shifted = pred_probs.data + LOG_FLOOR
    rows = -(target * np.log(shifted)).sum(axis=1)
    out = np.asarray((w * rows).sum() / m)

    def back(g):
        return (-(g / m) * w[:, None] * target / shifted,)

    return _make(out, (pred_probs,), back, "cross_entropy")


def mse(a: Tensor, b) -> Tensor:
    """Mean over rows of the squared Euclidean distance ``‖a_i - b_i‖²``."""
    b = _as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"mse shape mismatch: {a.shape} vs {b.shape}")
    d = a.data - b.data
    m = a.shape[0] if a.data.ndim == 2 else 1
    out = np.asarray((d * d).sum() / m)

    def back(g):
        ga = (2.0 * g / m) * d
        return (ga, -ga)

    return _make(out, (a, b), back, "mse")


def cosine_sim(u: Tensor, v: Tensor) -> Tensor:
    if u.data.ndim != 1 or u.shape != v.shape:
        raise DimensionError(f"cosine_sim needs equal-length vectors, got {u.shape} and {v.shape}")
    nu = float(np.linalg.norm(u.data))
    nv = float(np.linalg.norm(v.data))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateVectorError("cosine similarity of a zero vector")
    c = float(u.data @ v.data) / (nu * nv)

    def back(g):
        gu = g * (v.data / (nu * nv) - c * u.data / (nu * nu))
        gv = g * (u.data / (nu * nv) - c * v.data / (nv * nv))
        return (gu, gv)

    return _make(np.asarray(c), (u, v), back, "cosine_sim")


def normalize_rows(a: Tensor) -> Tensor:
    """Scale every row to unit Euclidean norm."""
    n = np.linalg.norm(a.data, axis=1, keepdims=True)
    if np.any(n == 0.0):
        raise DegenerateVectorError("cannot normalize a zero row")
    u = a.data / n

    def back(g):
        return ((g - u * (g * u).sum(axis=1, keepdims=True)) / n,)

    return _make(u, (a,), back, "normalize_rows")
