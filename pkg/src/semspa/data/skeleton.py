"""Skeleton sequences, topologies and datasets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SkeletonTopology:
    num_joints: int
    joint_names: list[str]
    edges: list[tuple[int, int]]  # (parent, child)

    def __post_init__(self):
        if self.num_joints < 1:
            raise ValueError("topology: num_joints must be positive")
        if len(self.joint_names) != self.num_joints:
            raise ValueError(
                f"topology: {len(self.joint_names)} joint names for {self.num_joints} joints"
            )
        self.edges = [(int(p), int(c)) for p, c in self.edges]
        for p, c in self.edges:
            if not (0 <= p < self.num_joints and 0 <= c < self.num_joints):
                raise ValueError(f"topology: edge ({p}, {c}) out of range for {self.num_joints} joints")
            if p == c:
                raise ValueError(f"topology: self-loop on joint {p}")

    def bone_topology(self) -> "SkeletonTopology":
        """Topology of the derived bone stream: one node per edge, no edges."""
        names = [f"{self.joint_names[p]}->{self.joint_names[c]}" for p, c in self.edges]
        return SkeletonTopology(len(self.edges), names, [])

    def to_json(self) -> dict:
        return {"num_joints": self.num_joints, "joint_names": list(self.joint_names), "edges": [list(e) for e in self.edges]}


@dataclass
class SkeletonSequence:
    """Coordinates ``(M, T, N, 3)`` with a per-(person, frame) validity mask.

    Absent persons or frames are zero-filled and flagged ``False`` in ``valid``.
    """

    coords: np.ndarray
    label: int = 0
    id: str = ""
    valid: np.ndarray | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 4 or self.coords.shape[-1] != 3:
            raise ValueError(f"sequence {self.id!r}: coords must be (M, T, N, 3), got {self.coords.shape}")
        if self.coords.shape[0] < 1 or self.coords.shape[1] < 1:
            raise ValueError(f"sequence {self.id!r}: needs at least one person and one frame")
        if not np.isfinite(self.coords).all():
            raise ValueError(f"sequence {self.id!r}: coordinates contain NaN or Inf")
        if self.valid is None:
            self.valid = np.ones(self.coords.shape[:2], dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
            if self.valid.shape != self.coords.shape[:2]:
                raise ValueError(f"sequence {self.id!r}: valid mask {self.valid.shape} != {self.coords.shape[:2]}")
        self.coords = np.where(self.valid[:, :, None, None], self.coords, 0.0)

    @property
    def persons(self) -> int:
        return self.coords.shape[0]

    @property
    def frames(self) -> int:
        return self.coords.shape[1]

    @property
    def num_joints(self) -> int:
        return self.coords.shape[2]

    def pad_persons(self, max_persons: int) -> "SkeletonSequence":
        M = self.persons
        if M == max_persons:
            return self
        if M > max_persons:
            return SkeletonSequence(self.coords[:max_persons], self.label, self.id, self.valid[:max_persons])
        coords = np.zeros((max_persons,) + self.coords.shape[1:])
        coords[:M] = self.coords
        valid = np.zeros((max_persons, self.frames), dtype=bool)
        valid[:M] = self.valid
        return SkeletonSequence(coords, self.label, self.id, valid)

    def joint_axis_features(self, max_persons: int | None = None) -> np.ndarray:
        """``(M_max * N, T, 3)`` array: persons concatenated along the joint axis."""
        seq = self.pad_persons(max_persons) if max_persons else self
        M, T, N, _ = seq.coords.shape
        return np.transpose(seq.coords, (0, 2, 1, 3)).reshape(M * N, T, 3)


@dataclass
class SkeletonDataset:
    topology: SkeletonTopology
    sequences: list[SkeletonSequence] = field(default_factory=list)
    class_names: list[str] = field(default_factory=list)
    max_persons: int = 1

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.sequences], dtype=np.int64)
