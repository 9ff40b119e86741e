"""Kernel offset enumeration and exact-match coordinate lookup."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np


def _axis_offsets(k: int) -> list[int]:
    # odd: symmetric; even: {-k/2, ..., k/2 - 1}
    if k % 2:
        h = (k - 1) // 2
        return list(range(-h, h + 1))
    return list(range(-k // 2, k // 2))


def _as4(value, name: str) -> tuple[int, int, int, int]:
    if isinstance(value, (int, np.integer)):
        value = (int(value),) * 4
    value = tuple(int(v) for v in value)
    if len(value) != 4:
        raise ValueError(f"{name}: expected 4 entries (x, y, z, t), got {value}")
    if any(v < 1 for v in value):
        raise ValueError(f"{name}: entries must be >= 1, got {value}")
    return value


@dataclass(frozen=True)
class KernelOffsets:
    """Integer neighbourhood of a 4-D kernel.

    Offsets are enumerated row-major over (x, y, z, t) with t fastest; the
    position in :attr:`offsets` is the weight index.
    """

    sizes: tuple[int, int, int, int]
    dilations: tuple[int, int, int, int] = (1, 1, 1, 1)

    def __post_init__(self):
        object.__setattr__(self, "sizes", _as4(self.sizes, "kernel sizes"))
        object.__setattr__(self, "dilations", _as4(self.dilations, "dilations"))

    @classmethod
    def cube(cls, k: int, k_t: int = 1, dilation_t: int = 1) -> "KernelOffsets":
        return cls((k, k, k, k_t), (1, 1, 1, dilation_t))

    @classmethod
    def temporal(cls, k_t: int, dilation: int = 1) -> "KernelOffsets":
        return cls((1, 1, 1, k_t), (1, 1, 1, dilation))

    @cached_property
    def offsets(self) -> np.ndarray:
        axes = [[o * d for o in _axis_offsets(k)] for k, d in zip(self.sizes, self.dilations)]
        offs = np.array(list(itertools.product(*axes)), dtype=np.int64)
        offs.setflags(write=False)
        return offs

    def __len__(self) -> int:
        return int(np.prod(self.sizes))

    def key(self) -> tuple:
        return (self.sizes, self.dilations)


class CoordinateIndex:
    """Exact-match map from integer coordinate rows to row indices."""

    def __init__(self, coords: np.ndarray):
        coords = np.asarray(coords, dtype=np.int64)
        if coords.ndim != 2:
            raise ValueError(f"CoordinateIndex: expected a 2-D coordinate array, got {coords.shape}")
        self.n = len(coords)
        self.dims = coords.shape[1]
        if self.n == 0:
            self.lo = np.zeros(self.dims, dtype=np.int64)
            self.hi = -np.ones(self.dims, dtype=np.int64)
            self._keys = np.zeros(0, dtype=np.int64)
            self._order = np.zeros(0, dtype=np.int64)
            return
        self.lo = coords.min(axis=0)
        self.hi = coords.max(axis=0)
        extent = self.hi - self.lo + 1
        if np.prod(extent.astype(np.float64)) > 2.0**62:
            raise ValueError("CoordinateIndex: coordinate extent too large to encode")
        self._radix = np.concatenate([np.cumprod(extent[::-1])[::-1][1:], [1]]).astype(np.int64)
        keys = (coords - self.lo) @ self._radix
        order = np.argsort(keys, kind="stable")
        sk = keys[order]
        if np.any(sk[1:] == sk[:-1]):
            raise ValueError("CoordinateIndex: duplicate coordinates (input is not coalesced)")
        self._keys = sk
        self._order = order

    def lookup(self, query: np.ndarray) -> np.ndarray:
        """Row index for each query row, ``-1`` where absent."""
        query = np.asarray(query, dtype=np.int64)
        flat = query.reshape(-1, self.dims)
        out = np.full(len(flat), -1, dtype=np.int64)
        if self.n == 0 or len(flat) == 0:
            return out.reshape(query.shape[:-1])
        inside = np.all((flat >= self.lo) & (flat <= self.hi), axis=1)
        keys = (flat[inside] - self.lo) @ self._radix
        pos = np.searchsorted(self._keys, keys)
        pos_c = np.minimum(pos, self.n - 1)
        hit = self._keys[pos_c] == keys
        found = np.full(len(keys), -1, dtype=np.int64)
        found[hit] = self._order[pos_c[hit]]
        out[inside] = found
        return out.reshape(query.shape[:-1])
