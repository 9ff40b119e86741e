from __future__ import annotations

import numpy as np

from .skeleton import SkeletonSequence, SkeletonTopology


def compute_bones(seq: SkeletonSequence, topo: SkeletonTopology) -> SkeletonSequence:
    """Bone stream: one vector ``child - parent`` per topology edge and frame."""
    if not topo.edges:
        raise ValueError("compute_bones: topology has no edges")
    if seq.num_joints != topo.num_joints:
        raise ValueError(f"compute_bones: sequence has {seq.num_joints} joints, topology {topo.num_joints}")
    parents = np.array([p for p, _ in topo.edges])
    children = np.array([c for _, c in topo.edges])
    bones = seq.coords[:, :, children] - seq.coords[:, :, parents]
    return SkeletonSequence(bones, seq.label, seq.id, seq.valid.copy())


def resample_indices(T: int, T_max: int) -> np.ndarray:
    if T < 1 or T_max < 1:
        raise ValueError(f"resample: frame counts must be positive (T={T}, T_max={T_max})")
    return (np.arange(T_max) * T) // T_max


def resample_temporal(seq: SkeletonSequence, T_max: int) -> SkeletonSequence:
    """Nearest-frame resampling with source index ``floor(i * T / T_max)``."""
    idx = resample_indices(seq.frames, T_max)
    return SkeletonSequence(seq.coords[:, idx], seq.label, seq.id, seq.valid[:, idx])
