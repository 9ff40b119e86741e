from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..sparse.tensor import SparseTensor4D, coalesce
from .skeleton import SkeletonSequence, SkeletonTopology


@dataclass(frozen=True)
class VoxelConfig:
    space_size: int = 64
    temporal_len: int = 32

    def __post_init__(self):
        if self.space_size < 2:
            raise ValueError(f"VoxelConfig: space_size must be >= 2, got {self.space_size}")
        if self.temporal_len < 1:
            raise ValueError(f"VoxelConfig: temporal_len must be >= 1, got {self.temporal_len}")


def voxelize(seq: SkeletonSequence, cfg: VoxelConfig, topo: SkeletonTopology | None = None) -> SparseTensor4D:
    """Quantize valid joints into a coalesced ``(x, y, z, t)`` sparse tensor.

    One scale is shared by the three spatial axes: with ``c`` the per-axis
    minimum and ``r`` the largest per-axis range over all valid joints,
    ``u -> floor((u - c) * (s - 1) / r)`` clamped to ``[0, s - 1]``. Features
    are one-hot joint indices; colliding joints sum into a multi-hot row.
    """
    if seq.frames != cfg.temporal_len:
        raise ValueError(
            f"voxelize: sequence has {seq.frames} frames, expected temporal_len={cfg.temporal_len}; resample first"
        )
    coords = seq.coords
    if not np.isfinite(coords).all():
        raise ValueError(f"voxelize: sequence {seq.id!r} has NaN/Inf coordinates")
    N = topo.num_joints if topo is not None else seq.num_joints
    if seq.num_joints != N:
        raise ValueError(f"voxelize: sequence has {seq.num_joints} joints, topology {N}")
    m_idx, t_idx = np.nonzero(seq.valid)
    if len(m_idx) == 0:
        return SparseTensor4D(np.zeros((0, 4), dtype=np.int64), np.zeros((0, N)), coalesced=True)
    pts = coords[m_idx, t_idx]  # (V, N, 3)
    flat = pts.reshape(-1, 3)
    lo = flat.min(axis=0)
    r = float((flat.max(axis=0) - lo).max())
    s = cfg.space_size
    if r == 0.0:
        warnings.warn(f"voxelize: sequence {seq.id!r} has zero spatial extent; all joints map to one voxel")
        q = np.zeros(flat.shape, dtype=np.int64)
    else:
        q = np.floor((flat - lo) * (s - 1) / r).astype(np.int64)
        q = np.clip(q, 0, s - 1)
    t_col = np.repeat(t_idx, N)
    R = np.column_stack([q, t_col])
    joint = np.tile(np.arange(N), len(m_idx))
    F = np.zeros((len(R), N))
    F[np.arange(len(R)), joint] = 1.0
    return coalesce(R, F)
