"""Reverse-mode automatic differentiation over dense float64 arrays.

Provides exactly the operations the detection model needs (dense matmul,
valid text convolution, max-over-time pooling, the usual activations,
inverted dropout, embedding lookup) plus a gradient-reversal node. Graphs
are implicit tapes: each op output records its parent tensors and a
backward closure, and :func:`backward` walks the tape in reverse
topological order, accumulating gradients into leaf tensors. No general
broadcasting, no GPU, no higher-order derivatives.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    ContractError,
    DimensionError,
    EmptySequenceError,
    VocabMismatchError,
)

LOG_CLAMP = 1e-12  # probabilities are clamped here before any log


class Tensor:
    """Dense float64 array with an accumulated-gradient buffer.

    ``grad`` always has the same shape as ``data``. Gradients accumulate
    across successive :func:`backward` calls until :meth:`zero_grad`.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[Callable[[np.ndarray], tuple]] = None

    # -- bookkeeping ------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def is_leaf(self) -> bool:
        return not self._parents

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def detach(self) -> "Tensor":
        """Same values, cut from the graph (no gradient flows through)."""
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- elementwise arithmetic -------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = _as_tensor(other)
        data = self.data + other.data
        sa, sb = self.shape, other.shape
        return _op(data, (self, other),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))

    __radd__ = __add__

    def __mul__(self, other) -> "Tensor":
        other = _as_tensor(other)
        data = self.data * other.data
        a, b = self, other
        return _op(data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape),
                              _unbroadcast(g * a.data, b.shape)))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return _op(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other) -> "Tensor":
        return self + (-_as_tensor(other))

    def __rsub__(self, other) -> "Tensor":
        return _as_tensor(other) + (-self)

    # -- reductions / shape -----------------------------------------------

    def sum(self, axis: Optional[int] = None) -> "Tensor":
        data = self.data.sum(axis=axis)
        shape = self.shape

        def bwd(g: np.ndarray) -> tuple:
            if axis is None:
                return (np.broadcast_to(g, shape).copy(),)
            return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

        return _op(data, (self,), bwd)

    def mean(self, axis: Optional[int] = None) -> "Tensor":
        n = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def log(self) -> "Tensor":
        """Natural log with the argument clamped at ``LOG_CLAMP``."""
        clamped = np.maximum(self.data, LOG_CLAMP)
        mask = self.data >= LOG_CLAMP
        return _op(np.log(clamped), (self,),
                   lambda g: (np.where(mask, g / clamped, 0.0),))

    def reshape(self, shape: tuple[int, ...]) -> "Tensor":
        old = self.shape
        return _op(self.data.reshape(shape), (self,),
                   lambda g: (g.reshape(old),))

    @property
    def T(self) -> "Tensor":
        if self.ndim != 2:
            raise DimensionError(f"transpose expects a matrix, got shape {self.shape}")
        return _op(self.data.T.copy(), (self,), lambda g: (g.T,))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _op(data: np.ndarray, parents: Sequence[Tensor],
        bwd: Callable[[np.ndarray], tuple]) -> Tensor:
    out = Tensor(data)
    out._parents = tuple(parents)
    out._backward = bwd
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # collapse gradient of a broadcast operand back to its own shape
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


# -- linear algebra ---------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-D tensors."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return _op(a.data @ b.data, (a, b),
               lambda g: (g @ b.data.T, a.data.T @ g))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along an existing axis."""
    if not tensors:
        raise EmptySequenceError("concat of zero tensors")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return _op(data, tensors, lambda g: tuple(np.split(g, splits, axis=axis)))


# -- activations ------------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x); subgradient 0 at exactly 0."""
    mask = x.data > 0
    return _op(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    """Numerically stable logistic function."""
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _op(out, (x,), lambda g: (g * out * (1.0 - out),))


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax of a 2-D tensor, max-subtraction stabilized."""
    if x.ndim != 2:
        raise DimensionError(f"softmax_rows expects a matrix, got shape {x.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)
    return _op(s, (x,),
               lambda g: (s * (g - (g * s).sum(axis=1, keepdims=True)),))


# -- text convolution stack --------------------------------------------------


def conv_text(x: Tensor, filters: Tensor, bias: Tensor) -> Tensor:
    """Valid 1-D convolution over token positions, stride 1.

    ``x`` is ``(d, k)`` or batched ``(B, d, k)``; ``filters`` is
    ``(n_c, d, h)``; output has ``k - h + 1`` positions per filter.
    """
    batched = x.ndim == 3
    x3 = x if batched else x.reshape((1,) + x.shape)
    _, d, k = x3.shape
    n_c, fd, h = filters.shape
    if fd != d:
        raise DimensionError(f"filter width {fd} != embedding dim {d}")
    if h > k:
        raise ConfigurationError(f"window size {h} exceeds sequence length {k}")

    windows = np.lib.stride_tricks.sliding_window_view(x3.data, h, axis=2)
    # windows: (B, d, L, h) with L = k - h + 1; flatten to (B, L, d*h) so the
    # contraction runs through BLAS rather than a generic einsum loop.
    L = k - h + 1
    B = x3.shape[0]
    win_flat = np.ascontiguousarray(windows.transpose(0, 2, 1, 3)).reshape(B, L, d * h)
    filt_flat = filters.data.reshape(n_c, d * h)
    data = (win_flat @ filt_flat.T).transpose(0, 2, 1)
    data += bias.data[None, :, None]

    def bwd(g: np.ndarray) -> tuple:
        g_bl = np.ascontiguousarray(g.transpose(0, 2, 1))  # (B, L, n_c)
        gwin = (g_bl @ filt_flat).reshape(B, L, d, h)
        gx = np.zeros_like(x3.data)
        for j in range(h):  # loop over filter offsets, not positions
            gx[:, :, j:j + L] += gwin[:, :, :, j].transpose(0, 2, 1)
        gf = np.tensordot(g_bl, win_flat, axes=([0, 1], [0, 1])).reshape(n_c, d, h)
        gb = g.sum(axis=(0, 2))
        return gx, gf, gb

    out = _op(data, (x3, filters, bias), bwd)
    return out if batched else out.reshape((n_c, L))


def max_pool_full(c: Tensor) -> Tensor:
    """Maximum over the last axis; gradient routes to the first argmax."""
    if c.shape[-1] == 0:
        raise EmptySequenceError("max_pool_full over an empty sequence")
    arg = c.data.argmax(axis=-1)
    data = np.take_along_axis(c.data, arg[..., None], axis=-1)[..., 0]
    shape = c.shape

    def bwd(g: np.ndarray) -> tuple:
        gc = np.zeros(shape)
        np.put_along_axis(gc, arg[..., None], g[..., None], axis=-1)
        return (gc,)

    return _op(data, (c,), bwd)


# -- stochastic / structural nodes -------------------------------------------


def dropout(x: Tensor, rate: float, training: bool,
            rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-rate); identity at inference."""
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ConfigurationError("training-mode dropout requires an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _op(x.data * mask, (x,), lambda g: (g * mask,))


def grl(x: Tensor, lam: float) -> Tensor:
    """Gradient reversal: identity forward, upstream gradient times -lam."""
    if lam < 0:
        raise ConfigurationError(f"gradient-reversal gain must be >= 0, got {lam}")
    return _op(x.data, (x,), lambda g: (-lam * g,))


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather embedding rows as columns.

    ``ids`` of shape ``(k,)`` yields ``(d, k)``; shape ``(B, k)`` yields
    ``(B, d, k)``. Row 0 (PAD) never receives gradient.
    """
    ids = np.asarray(ids)
    vocab_size, d = table.shape
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise VocabMismatchError(
            f"token id out of range for table of size {vocab_size}")
    if ids.ndim == 1:
        data = table.data[ids].T  # (d, k)
    elif ids.ndim == 2:
        data = table.data[ids].transpose(0, 2, 1)  # (B, d, k)
    else:
        raise DimensionError(f"ids must be 1-D or 2-D, got shape {ids.shape}")

    def bwd(g: np.ndarray) -> tuple:
        gt = np.zeros((vocab_size, d))
        if ids.ndim == 1:
            cols = g.T  # (k, d)
            flat = ids
        else:
            cols = g.transpose(0, 2, 1).reshape(-1, d)
            flat = ids.reshape(-1)
        np.add.at(gt, flat, cols)
        gt[0] = 0.0  # PAD row stays frozen
        return (gt,)

    return _op(data, (table,), bwd)


# -- backward pass ------------------------------------------------------------


def backward(seed: Tensor) -> None:
    """Accumulate d(seed)/d(leaf) into every requires_grad leaf.

    ``seed`` must be scalar. Intermediate gradients are transient; leaf
    gradients accumulate across calls until explicitly zeroed.
    """
    if seed.size != 1:
        raise ContractError(f"backward seed must be scalar, got shape {seed.shape}")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(seed, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(seed): np.ones_like(seed.data)}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is not None:
            for parent, pg in zip(node._parents, node._backward(g)):
                acc = grads.get(id(parent))
                if acc is None:
                    grads[id(parent)] = np.array(pg, dtype=np.float64, copy=True)
                else:
                    acc += pg
        elif node.requires_grad:
            node.grad += g
