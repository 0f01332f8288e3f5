"""Dense float64 tensors with reverse-mode automatic differentiation.

The graph is recorded define-by-run: every operation whose inputs require
gradients stores its parents and a closure computing parent gradients from the
output gradient.  ``backward`` walks that record once, in reverse topological
order, and accumulates gradients onto the participating leaves.  Everything is
float64 throughout so finite-difference checks stay meaningful.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, NumericError


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "is_param", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.is_param = False
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None

    # -- introspection -------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph plumbing ------------------------------------------------------

    @staticmethod
    def _result(
        data: np.ndarray,
        parents: tuple["Tensor", ...],
        grad_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]],
    ) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._grad_fn = grad_fn
        return out

    def backward(self) -> None:
        """Populate ``grad`` on every requires-grad leaf reachable from this scalar."""
        if self.data.size != 1:
            raise ContractError(f"backward requires a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ContractError("loss does not require grad; nothing to differentiate")
        order = _topo_order(self)
        flowing: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = flowing.pop(id(node), None)
            if grad is None:
                continue
            if node._grad_fn is None:
                if node.requires_grad:  # leaf
                    node.grad = grad if node.grad is None else node.grad + grad
                continue
            parent_grads = node._grad_fn(grad)
            for parent, pgrad in zip(node._parents, parent_grads):
                if pgrad is None or not parent.requires_grad:
                    continue
                acc = flowing.get(id(parent))
                flowing[id(parent)] = pgrad if acc is None else acc + pgrad

    # -- elementwise arithmetic ----------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = self.data + other.data
        return Tensor._result(
            out,
            (self, other),
            lambda g: (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape)),
        )

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = self.data - other.data
        return Tensor._result(
            out,
            (self, other),
            lambda g: (_unbroadcast(g, self.shape), _unbroadcast(-g, other.shape)),
        )

    def __rsub__(self, other) -> "Tensor":
        return as_tensor(other) - self

    def __mul__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = self.data * other.data
        return Tensor._result(
            out,
            (self, other),
            lambda g: (
                _unbroadcast(g * other.data, self.shape),
                _unbroadcast(g * self.data, other.shape),
            ),
        )

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = self.data / other.data
        if not np.all(np.isfinite(out)):
            raise NumericError("division produced non-finite values")
        return Tensor._result(
            out,
            (self, other),
            lambda g: (
                _unbroadcast(g / other.data, self.shape),
                _unbroadcast(-g * self.data / (other.data * other.data), other.shape),
            ),
        )

    def __rtruediv__(self, other) -> "Tensor":
        return as_tensor(other) / self

    def __neg__(self) -> "Tensor":
        return Tensor._result(-self.data, (self,), lambda g: (-g,))

    def power(self, exponent: float) -> "Tensor":
        """Elementwise power with a constant exponent."""
        out = self.data**exponent
        if not np.all(np.isfinite(out)):
            raise NumericError(f"power({exponent}) produced non-finite values")
        return Tensor._result(
            out, (self,), lambda g: (g * exponent * self.data ** (exponent - 1),)
        )

    # -- matrix product ------------------------------------------------------

    def __matmul__(self, other) -> "Tensor":
        other = as_tensor(other)
        if self.ndim != 2 or other.ndim != 2:
            raise DimensionError(
                f"matmul expects 2-d operands, got {self.shape} and {other.shape}"
            )
        if self.shape[1] != other.shape[0]:
            raise DimensionError(
                f"matmul inner extents disagree: {self.shape} x {other.shape}"
            )
        out = self.data @ other.data
        return Tensor._result(
            out,
            (self, other),
            lambda g: (g @ other.data.T, self.data.T @ g),
        )

    # -- shape manipulation ----------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        out = self.data.reshape(shape)
        return Tensor._result(out, (self,), lambda g: (g.reshape(old),))

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        out = self.data.transpose(axes)
        return Tensor._result(out, (self,), lambda g: (g.transpose(inverse),))

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def __getitem__(self, key) -> "Tensor":
        out = self.data[key]

        def grad_fn(g: np.ndarray):
            full = np.zeros_like(self.data)
            np.add.at(full, key, g)
            return (full,)

        return Tensor._result(np.array(out), (self,), grad_fn)

    # -- reductions ------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def grad_fn(g: np.ndarray):
            if axis is None:
                return (np.broadcast_to(g, self.shape).copy(),)
            g_exp = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(g_exp, self.shape).copy(),)

        return Tensor._result(np.array(out), (self,), grad_fn)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- elementwise nonlinear ---------------------------------------------------

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        if not np.all(np.isfinite(out)):
            raise NumericError("exp overflowed to non-finite values")
        return Tensor._result(out, (self,), lambda g: (g * out,))

    def log(self) -> "Tensor":
        if np.any(self.data <= 0.0):
            raise NumericError("log requires strictly positive inputs")
        return Tensor._result(np.log(self.data), (self,), lambda g: (g / self.data,))

    def sqrt(self) -> "Tensor":
        if np.any(self.data < 0.0):
            raise NumericError("sqrt requires non-negative inputs")
        out = np.sqrt(self.data)
        return Tensor._result(out, (self,), lambda g: (g * 0.5 / out,))

    def tanh(self) -> "Tensor":
        out = np.tanh(self.data)
        return Tensor._result(out, (self,), lambda g: (g * (1.0 - out * out),))


def _topo_order(root: Tensor) -> list[Tensor]:
    """Depth-first topological order of the recorded graph; parents precede children."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def zeros(*shape) -> Tensor:
    return Tensor(np.zeros(shape))


def ones(*shape) -> Tensor:
    return Tensor(np.ones(shape))


def parameter(rng: np.random.Generator, shape: tuple[int, ...], scale: float) -> Tensor:
    """Trainable tensor initialised from a scaled standard normal draw."""
    t = Tensor(rng.standard_normal(shape) * scale, requires_grad=True)
    t.is_param = True
    return t


def zero_parameter(shape: tuple[int, ...]) -> Tensor:
    t = Tensor(np.zeros(shape), requires_grad=True)
    t.is_param = True
    return t


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat requires at least one tensor")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g: np.ndarray):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._result(out, tuple(tensors), grad_fn)


def take_rows(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Row lookup (embedding); gradients scatter-add back into the table."""
    idx = np.asarray(ids, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError(f"row index out of range for table with {table.shape[0]} rows")
    out = table.data[idx]

    def grad_fn(g: np.ndarray):
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        return (full,)

    return Tensor._result(out, (table,), grad_fn)


def masked_fill(x: Tensor, keep: np.ndarray, fill: float) -> Tensor:
    """Replace entries where ``keep`` is False by ``fill``; gradient flows only to kept entries."""
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != x.shape:
        raise DimensionError(f"mask shape {keep.shape} does not match tensor {x.shape}")
    out = np.where(keep, x.data, fill)
    return Tensor._result(out, (x,), lambda g: (g * keep,))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if np.any(np.isnan(x.data)):
        raise NumericError("softmax received NaN input")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g: np.ndarray):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return ((g - inner) * out,)

    return Tensor._result(out, (x,), grad_fn)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis to zero mean / unit variance, then apply the affine map."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(
            f"layer_norm affine shapes {gamma.shape}/{beta.shape} do not match last extent {d}"
        )
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    normed = centered / (var + eps).sqrt()
    return normed * gamma + beta


def cross_entropy(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under row-wise softmax of ``logits``."""
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy expects 2-d logits, got {logits.shape}")
    idx = np.asarray(targets, dtype=np.int64)
    n, c = logits.shape
    if n == 0 or idx.size == 0:
        raise ContractError("cross_entropy received an empty batch")
    if idx.shape != (n,):
        raise DimensionError(f"expected {n} targets, got {idx.shape}")
    if idx.min() < 0 or idx.max() >= c:
        raise IndexError(f"target class out of range [0, {c})")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1)) + logits.data.max(axis=1)
    picked = logits.data[np.arange(n), idx]
    loss = float((lse - picked).mean())

    def grad_fn(g: np.ndarray):
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        probs[np.arange(n), idx] -= 1.0
        return (probs * (float(g) / n),)

    return Tensor._result(np.asarray(loss), (logits,), grad_fn)


def unfold_windows(x: Tensor, k: int) -> Tensor:
    """All k-by-k windows of a (c, H, W) tensor as rows of a ((H-k+1)*(W-k+1), c*k*k) matrix."""
    if x.ndim != 3:
        raise DimensionError(f"unfold_windows expects (c, H, W), got {x.shape}")
    c, h, w = x.shape
    if h < k or w < k:
        raise DimensionError(f"window {k} exceeds spatial extents of {x.shape}")
    hh, ww = h - k + 1, w - k + 1
    view = np.lib.stride_tricks.sliding_window_view(x.data, (k, k), axis=(1, 2))
    # view: (c, hh, ww, k, k) -> rows (hh*ww, c*k*k)
    out = view.transpose(1, 2, 0, 3, 4).reshape(hh * ww, c * k * k)

    def grad_fn(g: np.ndarray):
        gw = g.reshape(hh, ww, c, k, k).transpose(2, 0, 1, 3, 4)
        full = np.zeros_like(x.data)
        for ki in range(k):
            for kj in range(k):
                full[:, ki : ki + hh, kj : kj + ww] += gw[:, :, :, ki, kj]
        return (full,)

    return Tensor._result(out, (x,), grad_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return as_tensor(a) @ as_tensor(b)


def gelu(x: Tensor) -> Tensor:
    """Smooth tanh-form gaussian error linear unit."""
    c = math.sqrt(2.0 / math.pi)
    return x * 0.5 * ((c * (x + x.power(3.0) * 0.044715)).tanh() + 1.0)


def stack_rows(rows: Iterable[Tensor]) -> Tensor:
    """Stack 1-d tensors of equal length into a matrix."""
    return concat([r.reshape(1, -1) for r in rows], axis=0)
