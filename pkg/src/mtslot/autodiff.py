"""Dense float64 tensors with dynamic-graph reverse-mode differentiation.

Values are plain ``numpy.ndarray`` objects. Every op returns a :class:`Node`
that remembers its parents and a closure that pushes the output gradient back
to them. A graph is built per minibatch and thrown away after the update.

Broadcasting is deliberately narrow: a 1-D right operand of ``add``/``mul``
may be applied to every row of a matrix (bias / peephole vectors). Any other
shape mismatch raises :class:`ShapeError`.
"""
from __future__ import annotations

import struct
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64

_GRAD_ENABLED = True


class ShapeError(ValueError):
    pass


class NumericError(FloatingPointError):
    pass


@contextmanager
def no_grad():
    """Build no graph inside the block (inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Node:
    __slots__ = ("value", "grad", "parents", "op", "backward_fn", "name", "requires_grad")

    def __init__(self, value, op="input", parents=(), backward_fn=None, name=None,
                 requires_grad=False):
        self.value = value
        self.grad = None
        self.parents = parents
        self.op = op
        self.backward_fn = backward_fn
        self.name = name
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node<{self.op}{label} {self.value.shape}>"


def as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=DTYPE)


def constant(x) -> Node:
    return Node(as_array(x))


class Parameter(Node):
    """A named leaf that receives gradients."""

    __slots__ = ()

    def __init__(self, name: str, value):
        super().__init__(np.array(value, dtype=DTYPE), op="param", name=name,
                         requires_grad=True)


def grad_wanted(parents) -> bool:
    """True when an op over ``parents`` will be part of a differentiable graph."""
    return _GRAD_ENABLED and any(p.requires_grad for p in parents)


def record(value, op, parents, backward_fn):
    if not grad_wanted(parents):
        return Node(value, op)
    return Node(value, op, tuple(parents), backward_fn, requires_grad=True)


def accumulate(node: Node, g: np.ndarray):
    if not node.requires_grad:
        return
    # grads are never mutated in place, so sharing arrays is safe
    if node.grad is None:
        node.grad = g
    else:
        node.grad = node.grad + g


def _rowwise_ok(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape or (b.ndim == 1 and a.ndim == 2 and a.shape[1] == b.shape[0])


# ---------------------------------------------------------------- ops

def matmul(a: Node, b: Node) -> Node:
    av, bv = a.value, b.value
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {av.shape} x {bv.shape}")

    def back(g):
        accumulate(a, g @ bv.T)
        accumulate(b, av.T @ g)

    return record(av @ bv, "matmul", (a, b), back)


def transpose(a: Node) -> Node:
    if a.value.ndim != 2:
        raise ShapeError(f"transpose needs a matrix, got {a.value.shape}")
    return record(a.value.T, "transpose", (a,), lambda g: accumulate(a, g.T))


def add(a: Node, b: Node) -> Node:
    av, bv = a.value, b.value
    if not _rowwise_ok(av, bv):
        raise ShapeError(f"add shape mismatch: {av.shape} + {bv.shape}")

    def back(g):
        accumulate(a, g)
        accumulate(b, g if bv.shape == g.shape else g.sum(axis=0))

    return record(av + bv, "add", (a, b), back)


def mul(a: Node, b: Node) -> Node:
    av, bv = a.value, b.value
    if not _rowwise_ok(av, bv):
        raise ShapeError(f"mul shape mismatch: {av.shape} * {bv.shape}")

    def back(g):
        accumulate(a, g * bv)
        gb = g * av
        accumulate(b, gb if bv.shape == gb.shape else gb.sum(axis=0))

    return record(av * bv, "mul", (a, b), back)


def reshape(a: Node, shape) -> Node:
    v = a.value
    return record(v.reshape(shape), "reshape", (a,), lambda g: accumulate(a, g.reshape(v.shape)))


def scale(a: Node, c: float) -> Node:
    return record(a.value * c, "scale", (a,), lambda g: accumulate(a, g * c))


def sigmoid(x: Node) -> Node:
    # split by sign so exp never overflows
    v = x.value
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return record(out, "sigmoid", (x,), lambda g: accumulate(x, g * out * (1.0 - out)))


def tanh(x: Node) -> Node:
    out = np.tanh(x.value)
    return record(out, "tanh", (x,), lambda g: accumulate(x, g * (1.0 - out * out)))


def activation(x: Node, kind: str) -> Node:
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return tanh(x)
    raise ValueError(f"unknown activation {kind!r}")


def concat(nodes: Sequence[Node], axis: int = -1) -> Node:
    vals = [n.value for n in nodes]
    try:
        out = np.concatenate(vals, axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat mismatch: {[v.shape for v in vals]}") from exc
    ax = axis % out.ndim
    bounds = np.cumsum([v.shape[ax] for v in vals])[:-1]

    def back(g):
        for n, piece in zip(nodes, np.split(g, bounds, axis=ax)):
            accumulate(n, piece)

    return record(out, "concat", tuple(nodes), back)


def slice_(x: Node, start: int, stop: int, axis: int = -1) -> Node:
    v = x.value
    ax = axis % v.ndim
    idx = [slice(None)] * v.ndim
    idx[ax] = slice(start, stop)
    idx = tuple(idx)

    def back(g):
        full = np.zeros_like(v)
        full[idx] = g
        accumulate(x, full)

    return record(v[idx], "slice", (x,), back)


def take(x: Node, indices, axis: int = 0) -> Node:
    """Gather rows (embedding lookup, reordering); repeated rows accumulate."""
    idx = np.asarray(indices, dtype=np.intp)
    if axis != 0:
        raise ShapeError("take only supports axis 0")

    def back(g):
        full = np.zeros_like(x.value)
        np.add.at(full, idx, g)
        accumulate(x, full)

    return record(x.value[idx], "take", (x,), back)


def select(mask, a: Node, b: Node) -> Node:
    """``mask * a + (1 - mask) * b`` for a constant 0/1 mask broadcastable to a."""
    m = as_array(mask)
    if a.value.shape != b.value.shape:
        raise ShapeError(f"select shape mismatch: {a.value.shape} vs {b.value.shape}")
    inv = 1.0 - m

    def back(g):
        accumulate(a, g * m)
        accumulate(b, g * inv)

    return record(m * a.value + inv * b.value, "select", (a, b), back)


def sum_(x: Node) -> Node:
    v = x.value
    return record(np.array(v.sum()), "sum", (x,), lambda g: accumulate(x, np.full_like(v, g)))


def dropout(x: Node, p: float, rng: np.random.Generator | None, training: bool) -> Node:
    """Inverted dropout: survivors are scaled by 1/(1-p) so inference is identity."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    keep = (rng.random(x.value.shape) >= p) / (1.0 - p)
    return record(x.value * keep, "dropout", (x,), lambda g: accumulate(x, g * keep))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(as_array(logits)))


def softmax_cross_entropy(logits: Node, target, weights=None) -> Node:
    """Summed -log softmax(logits)[target] over rows.

    ``logits`` is a score vector with an int target, or an (N, L) matrix with
    N targets. ``weights`` optionally scales each row's loss (0 masks padding).
    """
    v = logits.value
    single = v.ndim == 1
    z = v[None, :] if single else v
    t = np.atleast_1d(np.asarray(target, dtype=np.intp))
    if t.shape[0] != z.shape[0]:
        raise ShapeError(f"{t.shape[0]} targets for {z.shape[0]} rows")
    n_labels = z.shape[1]
    if t.size and (t.min() < 0 or t.max() >= n_labels):
        raise IndexError(f"target out of range for {n_labels} labels: {t}")
    w = np.ones(z.shape[0]) if weights is None else as_array(weights)
    logp = log_softmax(z)
    rows = np.arange(z.shape[0])
    loss = -(w * logp[rows, t]).sum()
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss}")

    def back(g):
        d = np.exp(logp)
        d[rows, t] -= 1.0
        d *= (w * g)[:, None]
        accumulate(logits, d[0] if single else d)

    return record(np.array(loss), "softmax-xent", (logits,), back)


# ---------------------------------------------------------------- backward

def topo_order(root: Node) -> list[Node]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Node) -> dict[Node, np.ndarray]:
    """Reverse-mode sweep from a scalar loss. Returns parameter -> gradient."""
    if loss.value.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.value.shape}")
    order = topo_order(loss)
    for n in order:
        n.grad = None
    loss.grad = np.ones_like(loss.value)
    grads = {}
    for n in reversed(order):
        if n.grad is None:
            continue
        if n.backward_fn is not None:
            n.backward_fn(n.grad)
        if isinstance(n, Parameter):
            grads[n] = n.grad
    # drop references so the graph can be collected
    for n in order:
        if not isinstance(n, Parameter):
            n.grad = None
            n.backward_fn = None
            n.parents = ()
    return grads


# ---------------------------------------------------------------- checking

def relative_error(a, b) -> np.ndarray:
    a, b = as_array(a), as_array(b)
    return np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))


def numeric_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-5):
    x = as_array(x).copy()
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f(x)
        flat[i] = old - eps
        fm = f(x)
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * eps)
    return g


def finite_difference_check(f: Callable[[Node], Node], x, eps: float = 1e-5) -> float:
    """Max relative error between the autodiff gradient of ``f`` at ``x`` and
    central differences."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    p = Parameter("x", x)
    grads = backward(f(p))
    analytic = grads.get(p, np.zeros_like(p.value))

    def scalar(v):
        with no_grad():
            return float(f(constant(v)).value)

    numeric = numeric_gradient(scalar, p.value, eps)
    return float(relative_error(analytic, numeric).max(initial=0.0))


def check_parameters(loss_fn: Callable[[], Node], params: Iterable[Parameter],
                     eps: float = 1e-5) -> dict[str, float]:
    """Max relative gradient error per parameter for a closure over ``params``."""
    params = list(params)
    grads = backward(loss_fn())
    out = {}
    for p in params:
        analytic = grads.get(p, np.zeros_like(p.value))

        def scalar(v, p=p):
            saved = p.value
            p.value = v
            try:
                with no_grad():
                    return float(loss_fn().value)
            finally:
                p.value = saved

        numeric = numeric_gradient(scalar, p.value, eps)
        out[p.name] = float(relative_error(analytic, numeric).max(initial=0.0))
    return out


# ---------------------------------------------------------------- checkpoints

MAGIC = b"MTSLOTCK"
VERSION = 1


def save_tensors(path, tensors: dict[str, np.ndarray], meta: bytes = b"") -> None:
    """Versioned binary checkpoint: header, metadata blob, then named float64 tensors."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, len(meta), len(tensors)))
        fh.write(meta)
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_tensors(path) -> tuple[dict[str, np.ndarray], bytes]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, meta_len, count = struct.unpack_from("<III", data, 8)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 20
    meta = data[pos:pos + meta_len]
    pos += meta_len
    out = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + n].decode("utf-8")
        pos += n
        (rank,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shape = struct.unpack_from(f"<{rank}I", data, pos)
        pos += 4 * rank
        size = int(np.prod(shape, dtype=np.int64))
        out[name] = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
        pos += 8 * size
    return out, meta
