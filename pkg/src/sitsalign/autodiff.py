"""Minimal reverse-mode autodiff over float64 numpy arrays.

A `Tensor` records the primitive op that produced it (parents plus an
adjoint closure). `backward` walks the recorded graph once in reverse
topological order, so gradient accumulation order is fixed by the order
in which the forward was recorded and repeated runs are bit-identical.

Forward ops are pure; a graph is built and consumed within one logical
thread between forward and backward.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from . import numerics
from .errors import NumericError


class Tensor:
    """Node in the differentiable graph wrapping a float64 array."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_adjoint", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        adjoint: Callable[[np.ndarray], None] | None = None,
        name: str | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._adjoint = adjoint
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # Operator sugar; everything routes through the module-level primitives.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return index(self, key)

    def backward(self) -> None:
        backward(self)


def parameter(data, name: str) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def constant(data) -> Tensor:
    return Tensor(data)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents: Sequence[Tensor], adjoint) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(data)
    return Tensor(data, requires_grad=True, parents=tuple(parents), adjoint=adjoint)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if g.shape != t.data.shape:
        raise NumericError(
            f"gradient shape {g.shape} does not match tensor shape {t.data.shape}"
        )
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back down to `shape`."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(output: Tensor, zero_existing: bool = True) -> None:
    """Populate `.grad` on every reachable parameter of a scalar output."""
    if output.data.size != 1:
        raise NumericError(
            f"backward requires a scalar output, got shape {output.data.shape}"
        )
    if not np.isfinite(output.data).all():
        raise NumericError("backward on a non-finite output")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(output, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    if zero_existing:
        for node in order:
            node.grad = None
    output.grad = np.ones_like(output.data)
    for node in reversed(order):
        if node._adjoint is not None and node.grad is not None:
            node._adjoint(node.grad)


def grads(loss: Tensor, params: Iterable[Tensor]) -> dict[str, np.ndarray]:
    """Backward pass returning one gradient per named parameter."""
    backward(loss)
    out = {}
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        out[p.name or f"param@{id(p):x}"] = g
    return out


# ----------------------------------------------------------------------
# primitives


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def adjoint(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), adjoint)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def adjoint(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), adjoint)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data @ b.data

    def adjoint(g):
        _accum(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        _accum(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    return _make(out_data, (a, b), adjoint)


def reshape(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.reshape(shape)

    def adjoint(g):
        _accum(a, g.reshape(a.data.shape))

    return _make(out_data, (a,), adjoint)


def swapaxes(a: Tensor, i: int, j: int) -> Tensor:
    a = as_tensor(a)
    out_data = np.swapaxes(a.data, i, j)

    def adjoint(g):
        _accum(a, np.swapaxes(g, i, j))

    return _make(out_data, (a,), adjoint)


def index(a: Tensor, key) -> Tensor:
    """Basic (static) indexing; gradient scatters back with accumulation."""
    a = as_tensor(a)
    out_data = a.data[key]

    def adjoint(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, key, g)
        _accum(a, ga)

    return _make(out_data, (a,), adjoint)


def gather_rows(table: Tensor, idx: np.ndarray) -> Tensor:
    """Row lookup `table[idx]` for an integer index vector (embedding gather)."""
    table = as_tensor(table)
    idx = np.asarray(idx, dtype=np.intp)
    out_data = table.data[idx]

    def adjoint(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        _accum(table, gt)

    return _make(out_data, (table,), adjoint)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def adjoint(g):
        offset = 0
        for p, size in zip(parts, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offset, offset + size)
            _accum(p, g[tuple(sl)])
            offset += size

    return _make(out_data, tuple(parts), adjoint)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def adjoint(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    return _make(out_data, (a,), adjoint)


def mean_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


def exp(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def adjoint(g):
        _accum(a, g * out_data)

    return _make(out_data, (a,), adjoint)


def gelu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out_data = numerics.gelu(a.data)

    def adjoint(g):
        _accum(a, g * numerics.gelu_grad(a.data))

    return _make(out_data, (a,), adjoint)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    a = as_tensor(a)
    y = numerics.softmax(a.data)

    def adjoint(g):
        dot = np.sum(g * y, axis=-1, keepdims=True)
        _accum(a, y * (g - dot))

    return _make(y, (a,), adjoint)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-8) -> Tensor:
    """Layer norm over the last axis with learnable affine terms."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    y = numerics.layer_norm(x.data, gain.data, bias.data, eps)
    n = x.data.shape[-1]
    mu = np.mean(x.data, axis=-1, keepdims=True)
    centered = x.data - mu
    ivar = 1.0 / np.sqrt(np.mean(centered**2, axis=-1, keepdims=True) + eps)
    xhat = centered * ivar

    def adjoint(g):
        lead = tuple(range(g.ndim - 1))
        _accum(gain, np.sum(g * xhat, axis=lead))
        _accum(bias, np.sum(g, axis=lead))
        dxhat = g * gain.data
        # classic fused form: ivar/n * (n*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
        s1 = np.sum(dxhat, axis=-1, keepdims=True)
        s2 = np.sum(dxhat * xhat, axis=-1, keepdims=True)
        _accum(x, (ivar / n) * (n * dxhat - s1 - xhat * s2))

    return _make(y, (x, gain, bias), adjoint)


def l2_normalize(v: Tensor) -> Tensor:
    """Unit-normalize the last axis; raises on degenerate norms."""
    v = as_tensor(v)
    y = numerics.l2_normalize(v.data)
    norm = np.sqrt(np.sum(v.data**2, axis=-1, keepdims=True))

    def adjoint(g):
        dot = np.sum(g * y, axis=-1, keepdims=True)
        _accum(v, (g - y * dot) / norm)

    return _make(y, (v,), adjoint)


def softmax_xent(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Per-row cross entropy of softmax(logits) against integer targets."""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.intp)
    z = logits.data
    m = np.max(z, axis=-1, keepdims=True)
    shifted = z - m
    lse = np.log(np.sum(np.exp(shifted), axis=-1)) + m[..., 0]
    rows = np.arange(z.shape[0])
    losses = lse - z[rows, targets]
    p = numerics.softmax(z)

    def adjoint(g):
        gl = p.copy()
        gl[rows, targets] -= 1.0
        _accum(logits, gl * g[..., None])

    return _make(losses, (logits,), adjoint)


def pad_ragged(tokens: Tensor, lengths: Sequence[int], lead: Tensor) -> tuple[Tensor, np.ndarray]:
    """Pack ragged per-sample token runs into a padded batch.

    `tokens` is the concatenation of all samples' tokens along axis 0;
    `lengths` gives each sample's run length. Row 0 of every sample is the
    shared `lead` vector (the class token). Returns the padded `[B, L+1, d]`
    tensor and a float mask `[B, L+1]` with 1 on real positions.
    """
    tokens, lead = as_tensor(tokens), as_tensor(lead)
    lengths = [int(n) for n in lengths]
    bsz = len(lengths)
    width = tokens.data.shape[-1]
    maxlen = 1 + (max(lengths) if lengths else 0)
    out = np.zeros((bsz, maxlen, width), dtype=np.float64)
    mask = np.zeros((bsz, maxlen), dtype=np.float64)
    offsets = np.concatenate([[0], np.cumsum(lengths)])[:-1]
    out[:, 0, :] = lead.data
    mask[:, 0] = 1.0
    for b, (off, n) in enumerate(zip(offsets, lengths)):
        out[b, 1 : 1 + n, :] = tokens.data[off : off + n]
        mask[b, 1 : 1 + n] = 1.0

    def adjoint(g):
        _accum(lead, g[:, 0, :].sum(axis=0))
        gt = np.zeros_like(tokens.data)
        for b, (off, n) in enumerate(zip(offsets, lengths)):
            gt[off : off + n] = g[b, 1 : 1 + n, :]
        _accum(tokens, gt)

    return _make(out, (tokens, lead), adjoint), mask
