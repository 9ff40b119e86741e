"""Dense reference implementations used to check the sparse engine."""

from __future__ import annotations

import numpy as np

from .kernel import KernelOffsets
from .tensor import SparseTensor4D

MAX_DENSE_CELLS = 16**4


def _check_grid(shape) -> None:
    cells = int(np.prod(shape))
    if cells > MAX_DENSE_CELLS:
        raise ValueError(f"dense oracle: grid {tuple(shape)} has {cells} cells, limit is {MAX_DENSE_CELLS}")


def scatter_dense(x: SparseTensor4D, grid, fill: float = 0.0) -> np.ndarray:
    """Materialize a single-sample sparse tensor on a ``grid`` = (X, Y, Z, T) array."""
    grid = tuple(int(g) for g in grid)
    _check_grid(grid)
    if x.num_batches > 1:
        raise ValueError("scatter_dense: expects a single-sample tensor")
    out = np.full(grid + (x.num_channels,), fill, dtype=np.float64)
    R = x.R
    out[R[:, 0], R[:, 1], R[:, 2], R[:, 3]] = x.features
    return out


def gather_dense(Y: np.ndarray, R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=np.int64)
    return Y[R[:, 0], R[:, 1], R[:, 2], R[:, 3]]


def _shifted_views(X: np.ndarray, offsets: KernelOffsets, fill: float):
    """Yield (k, view) with ``view[p] = X[p - delta_k]`` (``fill`` outside)."""
    offs = offsets.offsets
    margin = np.abs(offs).max(axis=0)
    pad = [(int(m), int(m)) for m in margin] + [(0, 0)]
    Xp = np.pad(X, pad, constant_values=fill)
    dims = X.shape[:4]
    for k, delta in enumerate(offs):
        sl = tuple(slice(int(m - d), int(m - d + n)) for m, d, n in zip(margin, delta, dims))
        yield k, Xp[sl]


def dense_oracle_conv(X: np.ndarray, weight: np.ndarray, offsets: KernelOffsets, bias=None, stride=1) -> np.ndarray:
    """Textbook zero-padded dense convolution with the sparse engine's offset ordering.

    ``X`` is ``(X, Y, Z, T, C_in)``; returns the strided output grid
    ``(ceil(X/s), ..., C_out)`` with ``out[q] = sum_k W[k] . X[q * s - delta_k]``.
    """
    X = np.asarray(X, dtype=np.float64)
    _check_grid(X.shape[:4])
    weight = np.asarray(weight, dtype=np.float64)
    if weight.shape[0] != len(offsets) or weight.shape[1] != X.shape[-1]:
        raise ValueError(f"dense_oracle_conv: weight {weight.shape} vs input {X.shape} / {len(offsets)} offsets")
    full = np.zeros(X.shape[:4] + (weight.shape[2],))
    for k, view in _shifted_views(X, offsets, 0.0):
        full += view @ weight[k]
    if bias is not None:
        full += np.asarray(bias)
    s = (stride,) * 4 if np.isscalar(stride) else tuple(stride)
    return full[:: s[0], :: s[1], :: s[2], :: s[3]]


def dense_oracle_max_pool(X: np.ndarray, occupied: np.ndarray, offsets: KernelOffsets, stride=1):
    """Dense max-pool with empty cells at ``-inf``.

    Returns ``(pooled, has_neighbour)`` on the strided grid.
    """
    X = np.where(occupied[..., None], X, -np.inf)
    _check_grid(X.shape[:4])
    full = np.full(X.shape, -np.inf)
    for _, view in _shifted_views(X, offsets, -np.inf):
        full = np.maximum(full, view)
    count = np.zeros(X.shape[:4])
    for _, view in _shifted_views(occupied.astype(np.float64)[..., None], offsets, 0.0):
        count += view[..., 0]
    s = (stride,) * 4 if np.isscalar(stride) else tuple(stride)
    sl = (slice(None, None, s[0]), slice(None, None, s[1]), slice(None, None, s[2]), slice(None, None, s[3]))
    return full[sl], count[sl] > 0
