"""Coordinate/feature sparse tensors over (x, y, z, t)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..autodiff import Tensor

COORD_DIMS = 4


@dataclass
class SparseTensor4D:
    """Paired coordinate matrix ``R`` (P x 4 ints) and feature matrix ``F`` (P x C).

    ``batch`` tags each row with the sample it belongs to so several clouds
    can share one tensor; neighbourhoods never cross batch ids. ``F`` is a
    plain array for data and a :class:`Tensor` once it flows through layers.
    Coalesced tensors have unique rows sorted lexicographically by
    ``(batch, x, y, z, t)``.
    """

    R: np.ndarray
    F: np.ndarray | Tensor
    batch: np.ndarray | None = None
    coalesced: bool = False

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=np.int64).reshape(-1, COORD_DIMS)
        if self.batch is None:
            self.batch = np.zeros(len(self.R), dtype=np.int64)
        else:
            self.batch = np.asarray(self.batch, dtype=np.int64)
        if not isinstance(self.F, Tensor):
            self.F = np.asarray(self.F, dtype=np.float64)
        if self.F.ndim != 2 or self.F.shape[0] != self.R.shape[0]:
            raise ValueError(f"SparseTensor4D: R has {self.R.shape[0]} rows but F has shape {self.F.shape}")
        if self.batch.shape != (self.R.shape[0],):
            raise ValueError("SparseTensor4D: batch must have one entry per row")

    @property
    def num_points(self) -> int:
        return int(self.R.shape[0])

    @property
    def num_channels(self) -> int:
        return int(self.F.shape[1])

    @property
    def num_batches(self) -> int:
        return int(self.batch.max()) + 1 if len(self.batch) else 0

    @property
    def features(self) -> np.ndarray:
        return self.F.data if isinstance(self.F, Tensor) else self.F

    def feature_tensor(self) -> Tensor:
        return self.F if isinstance(self.F, Tensor) else Tensor(self.F)

    def with_features(self, F) -> "SparseTensor4D":
        return SparseTensor4D(self.R, F, self.batch, coalesced=self.coalesced)

    def sample(self, b: int) -> "SparseTensor4D":
        rows = self.batch == b
        return SparseTensor4D(self.R[rows], self.features[rows], None, coalesced=self.coalesced)

    @staticmethod
    def cat(tensors: Sequence["SparseTensor4D"]) -> "SparseTensor4D":
        """Stack single-sample tensors into one batched tensor (batch id = position)."""
        if not tensors:
            raise ValueError("SparseTensor4D.cat: empty list")
        R = np.concatenate([t.R for t in tensors])
        F = np.concatenate([t.features for t in tensors])
        batch = np.concatenate([np.full(t.num_points, i, dtype=np.int64) for i, t in enumerate(tensors)])
        return SparseTensor4D(R, F, batch, coalesced=all(t.coalesced for t in tensors))

    def to_csv(self, path) -> None:
        """Write rows ``x, y, z, t, f_0 .. f_{C-1}`` (plus ``batch`` when batched)."""
        feats = self.features
        batched = self.num_batches > 1
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = (["batch"] if batched else []) + ["x", "y", "z", "t"]
            w.writerow(head + [f"f_{c}" for c in range(feats.shape[1])])
            for i in range(self.num_points):
                row = ([int(self.batch[i])] if batched else []) + [int(v) for v in self.R[i]]
                w.writerow(row + [repr(float(v)) for v in feats[i]])


def _lex_keys(R: np.ndarray, batch: np.ndarray) -> np.ndarray:
    return np.lexsort((R[:, 3], R[:, 2], R[:, 1], R[:, 0], batch))


def coalesce(R, F, batch=None) -> SparseTensor4D:
    """Merge rows with identical coordinates by summing features; sort lexicographically."""
    R = np.asarray(R, dtype=np.int64).reshape(-1, COORD_DIMS)
    F = np.asarray(F, dtype=np.float64)
    if F.ndim == 1:
        F = F.reshape(len(R), -1)
    if F.shape[0] != R.shape[0]:
        raise ValueError(f"coalesce: R has {R.shape[0]} rows but F has {F.shape[0]}")
    batch = np.zeros(len(R), dtype=np.int64) if batch is None else np.asarray(batch, dtype=np.int64)
    if len(R) == 0:
        return SparseTensor4D(R, F, batch, coalesced=True)
    order = _lex_keys(R, batch)
    Rs, Fs, bs = R[order], F[order], batch[order]
    new = np.ones(len(Rs), dtype=bool)
    new[1:] = np.any(Rs[1:] != Rs[:-1], axis=1) | (bs[1:] != bs[:-1])
    group = np.cumsum(new) - 1
    out_F = np.zeros((int(group[-1]) + 1, F.shape[1]))
    np.add.at(out_F, group, Fs)
    return SparseTensor4D(Rs[new], out_F, bs[new], coalesced=True)


def is_coalesced(st: SparseTensor4D) -> bool:
    if st.num_points < 2:
        return True
    keys = np.column_stack([st.batch, st.R])
    diff = keys[1:] - keys[:-1]
    # first nonzero column of each diff row must be positive
    nz = diff != 0
    first = np.argmax(nz, axis=1)
    has = nz.any(axis=1)
    return bool(np.all(has) and np.all(diff[np.arange(len(diff)), first] > 0))
