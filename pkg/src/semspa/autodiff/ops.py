"""Differentiable primitives.

Each function takes tensors (or array-likes, treated as constants) and
returns a new :class:`Tensor` whose backward closure is recorded on the
graph. Shapes are validated up front so errors name the op and the shapes.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import Tensor, as_tensor


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._from_op(a.data + b.data, (a, b), bwd, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor._from_op(a.data - b.data, (a, b), bwd, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def bwd(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._from_op(a.data * b.data, (a, b), bwd, "mul")


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return Tensor._from_op(a.data * c, (a,), lambda g: (g * c,), "scale")


def power(a, p: float) -> Tensor:
    """Elementwise ``a ** p`` for a constant exponent."""
    a = as_tensor(a)
    p = float(p)
    out = a.data**p

    def bwd(g):
        return (g * p * a.data ** (p - 1.0),)

    return Tensor._from_op(out, (a,), bwd, "power")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return Tensor._from_op(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(y, (a,), bwd, "softmax")


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    y = z - lse

    def bwd(g):
        return (g - np.exp(y) * g.sum(axis=axis, keepdims=True),)

    return Tensor._from_op(y, (a,), bwd, "log_softmax")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bwd(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor._from_op(a.data @ b.data, (a, b), bwd, "matmul")


def linear(x, weight, bias=None) -> Tensor:
    """Affine map over the last axis: ``x @ weight + bias``."""
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ValueError(f"linear: input {x.shape} does not match weight {weight.shape}")
    parents = [x, weight]
    out = x.data @ weight.data
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[1],):
            raise ValueError(f"linear: bias {bias.shape} does not match weight {weight.shape}")
        out = out + bias.data
        parents.append(bias)

    def bwd(g):
        g2 = g.reshape(-1, g.shape[-1])
        x2 = x.data.reshape(-1, x.shape[-1])
        grads = [g @ weight.data.T, x2.T @ g2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return grads

    return Tensor._from_op(out, parents, bwd, "linear")


def _parse_einsum(spec: str, n: int) -> tuple[list[str], str]:
    if "..." in spec or "->" not in spec:
        raise ValueError(f"einsum: explicit subscripts without ellipsis required, got {spec!r}")
    lhs, out = spec.replace(" ", "").split("->")
    ins = lhs.split(",")
    if len(ins) != n:
        raise ValueError(f"einsum: {spec!r} expects {len(ins)} operands, got {n}")
    for s in ins:
        if len(set(s)) != len(s):
            raise ValueError(f"einsum: repeated index within one operand in {spec!r}")
    return ins, out


def einsum(spec: str, *operands) -> Tensor:
    """Einstein summation over explicitly-labelled axes."""
    ts = [as_tensor(o) for o in operands]
    ins, out_sub = _parse_einsum(spec, len(ts))
    for s, t in zip(ins, ts):
        if len(s) != t.ndim:
            raise ValueError(f"einsum: subscript {s!r} does not match shape {t.shape}")
    try:
        out = np.einsum(spec, *[t.data for t in ts], optimize=True)
    except ValueError as exc:
        shapes = ", ".join(str(t.shape) for t in ts)
        raise ValueError(f"einsum: {spec!r} with shapes {shapes}: {exc}") from None

    def bwd(g):
        grads = []
        for k, (s, t) in enumerate(zip(ins, ts)):
            if not t.requires_grad:
                grads.append(None)
                continue
            others = [(ins[j], ts[j].data) for j in range(len(ts)) if j != k]
            present = set(out_sub).union(*[set(o[0]) for o in others]) if others else set(out_sub)
            keep = "".join(c for c in s if c in present)
            sub = ",".join([out_sub] + [o[0] for o in others]) + "->" + keep
            gk = np.einsum(sub, g, *[o[1] for o in others], optimize=True)
            if keep != s:
                shape = [t.shape[i] if c in present else 1 for i, c in enumerate(s)]
                gk = np.broadcast_to(gk.reshape(shape), t.shape).copy()
            grads.append(gk)
        return grads

    return Tensor._from_op(out, ts, bwd, "einsum")


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ValueError(f"reshape: cannot reshape {a.shape} to {tuple(shape)}") from None
    return Tensor._from_op(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return Tensor._from_op(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),), "transpose")


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor._from_op(out, (a,), bwd, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size // max(out.size, 1) if a.data.size else 1

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape).copy(),)

    return Tensor._from_op(out, (a,), bwd, "mean")


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ValueError("concat: empty input list")
    ax = axis % ts[0].ndim
    for t in ts[1:]:
        if t.ndim != ts[0].ndim or any(
            t.shape[i] != ts[0].shape[i] for i in range(t.ndim) if i != ax
        ):
            raise ValueError(f"concat: shape {t.shape} incompatible with {ts[0].shape} on axis {axis}")
    sizes = [t.shape[ax] for t in ts]
    bounds = np.cumsum([0] + sizes)

    def bwd(g):
        return [
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(ts))
        ]

    return Tensor._from_op(np.concatenate([t.data for t in ts], axis=ax), ts, bwd, "concat")


def slice_axis(a, start: int, stop: int, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    ax = axis % a.ndim
    if not 0 <= start <= stop <= a.shape[ax]:
        raise ValueError(f"slice_axis: [{start}:{stop}] out of range for axis of size {a.shape[ax]}")
    index = [slice(None)] * a.ndim
    index[ax] = slice(start, stop)
    index = tuple(index)

    def bwd(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return Tensor._from_op(a.data[index], (a,), bwd, "slice")


def split(a, sections: int | Sequence[int], axis: int = -1) -> list[Tensor]:
    """Split into equal ``sections`` (int) or explicit sizes (sequence)."""
    a = as_tensor(a)
    n = a.shape[axis]
    if isinstance(sections, int):
        if sections <= 0 or n % sections:
            raise ValueError(f"split: axis of size {n} not divisible into {sections} parts")
        sizes = [n // sections] * sections
    else:
        sizes = list(sections)
        if np.sum(sizes) != n:
            raise ValueError(f"split: sizes {sizes} do not sum to axis size {n}")
    out, start = [], 0
    for s in sizes:
        out.append(slice_axis(a, start, start + s, axis))
        start += s
    return out


def take(a, index: np.ndarray, axis: int = 0) -> Tensor:
    """Gather along ``axis`` with an integer index array (repeats allowed)."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    ax = axis % a.ndim

    def bwd(g):
        full = np.zeros_like(a.data)
        gm = np.moveaxis(g, ax, 0)
        fm = np.moveaxis(full, ax, 0)
        np.add.at(fm, index, gm)
        return (full,)

    return Tensor._from_op(np.take(a.data, index, axis=ax), (a,), bwd, "take")


def pick(a, labels: np.ndarray) -> Tensor:
    """``a[i, labels[i]]`` for a 2-D tensor."""
    a = as_tensor(a)
    labels = np.asarray(labels, dtype=np.int64)
    if a.ndim != 2 or labels.shape != (a.shape[0],):
        raise ValueError(f"pick: expected (B, K) tensor and (B,) labels, got {a.shape}, {labels.shape}")
    rows = np.arange(a.shape[0])

    def bwd(g):
        full = np.zeros_like(a.data)
        full[rows, labels] = g
        return (full,)

    return Tensor._from_op(a.data[rows, labels], (a,), bwd, "pick")


def segment_mean(a, segments: np.ndarray, num_segments: int) -> Tensor:
    """Mean of rows of a 2-D tensor grouped by integer segment id."""
    a = as_tensor(a)
    segments = np.asarray(segments, dtype=np.int64)
    if a.ndim != 2 or segments.shape != (a.shape[0],):
        raise ValueError(f"segment_mean: rows {a.shape} vs segments {segments.shape}")
    counts = np.bincount(segments, minlength=num_segments).astype(np.float64)
    if np.any(counts == 0):
        raise ValueError("segment_mean: empty segment")
    onehot = np.zeros((num_segments, a.shape[0]))
    onehot[segments, np.arange(a.shape[0])] = 1.0
    out = (onehot @ a.data) / counts[:, None]

    def bwd(g):
        return ((g / counts[:, None])[segments],)

    return Tensor._from_op(out, (a,), bwd, "segment_mean")


def layer_norm(a, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to zero mean, unit variance (no affine)."""
    a = as_tensor(a)
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv

    def bwd(g):
        gm = g.mean(axis=-1, keepdims=True)
        gy = (g * y).mean(axis=-1, keepdims=True)
        return (inv * (g - gm - y * gy),)

    return Tensor._from_op(y, (a,), bwd, "layer_norm")


def conv1d(x, weight, bias=None, stride: int = 1, dilation: int = 1) -> Tensor:
    """Temporal convolution over axis -2 with channels on the last axis.

    ``x`` is ``(..., T, C_in)``, ``weight`` is ``(k, C_in, C_out)``. Zero
    "same" padding of ``dilation * (k - 1)`` frames is split left-heavy, so
    the output has ``ceil(T / stride)`` frames. Cross-correlation convention:
    ``out[i] = sum_j weight[j] . x[i * stride + (j - (k - 1) // 2) * dilation]``.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if dilation < 1 or stride < 1:
        raise ValueError(f"conv1d: stride ({stride}) and dilation ({dilation}) must be >= 1")
    if x.ndim < 2 or weight.ndim != 3 or weight.shape[1] != x.shape[-1]:
        raise ValueError(f"conv1d: input {x.shape} does not match kernel {weight.shape}")
    k = weight.shape[0]
    T = x.shape[-2]
    span = dilation * (k - 1)
    pad_l = dilation * ((k - 1) // 2)
    pad_r = span - pad_l
    t_out = -(-T // stride)
    pad_width = [(0, 0)] * (x.ndim - 2) + [(pad_l, pad_r), (0, 0)]
    xp = np.pad(x.data, pad_width)

    def tap(j):
        start = j * dilation
        return (Ellipsis, slice(start, start + (t_out - 1) * stride + 1, stride), slice(None))

    cols = np.stack([xp[tap(j)] for j in range(k)], axis=-2)  # (..., t_out, k, C_in)
    w2 = weight.data.reshape(k * weight.shape[1], weight.shape[2])
    lead = cols.shape[:-2]
    cols2 = cols.reshape(-1, w2.shape[0])
    out = (cols2 @ w2).reshape(*lead, weight.shape[2])
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[2],):
            raise ValueError(f"conv1d: bias {bias.shape} does not match kernel {weight.shape}")
        out = out + bias.data
        parents.append(bias)

    def bwd(g):
        g2 = g.reshape(-1, g.shape[-1])
        gw = (cols2.T @ g2).reshape(weight.shape)
        gcols = (g2 @ w2.T).reshape(cols.shape)
        gxp = np.zeros_like(xp)
        for j in range(k):
            gxp[tap(j)] += gcols[..., j, :]
        gx = gxp[..., pad_l : pad_l + T, :]
        grads = [np.ascontiguousarray(gx), gw]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return grads

    return Tensor._from_op(out, parents, bwd, "conv1d")


def primitive_forward(kind: str, inputs: Sequence, **attrs) -> Tensor:
    """Dispatch a primitive by name; convenience for table-driven callers."""
    table = {
        "matmul": matmul,
        "add": add,
        "sub": sub,
        "mul": mul,
        "scale": scale,
        "relu": relu,
        "softmax": softmax,
        "log_softmax": log_softmax,
        "concat": lambda *xs, **kw: concat(xs, **kw),
        "split": split,
        "mean": mean,
        "sum": sum,
        "conv1d": conv1d,
        "linear": linear,
        "layer_norm": layer_norm,
        "einsum": lambda *xs, **kw: einsum(kw.pop("spec"), *xs),
    }
    if kind not in table:
        raise ValueError(f"primitive_forward: unknown op kind {kind!r}")
    return table[kind](*inputs, **attrs)
