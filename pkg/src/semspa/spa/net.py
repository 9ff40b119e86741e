from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Module, Tensor, ops
from ..autodiff.nn import Linear
from ..data.voxel import VoxelConfig
from ..sparse import SparseTensor4D, is_coalesced
from .blocks import SPABlockConfig, make_block


@dataclass
class SPANetConfig:
    num_classes: int
    in_channels: int
    variant: str = "4d"
    channels: tuple[int, ...] = (16, 32, 64)
    strides: tuple[int, ...] = (2, 2, 2)
    k: int = 5
    k_t: int = 3
    dilations: tuple[int, ...] = field(default=(1, 3, 5, 7))
    branches: int = 4
    norm: bool = False
    space_size: int = 32
    temporal_len: int = 16

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.strides = tuple(int(s) for s in self.strides)
        self.dilations = tuple(int(d) for d in self.dilations)
        if not self.channels:
            raise ValueError("SPANetConfig: at least one block required")
        if len(self.strides) != len(self.channels):
            raise ValueError(f"SPANetConfig: {len(self.strides)} strides for {len(self.channels)} blocks")
        if self.num_classes < 2:
            raise ValueError(f"SPANetConfig: need at least 2 classes, got {self.num_classes}")
        self.blocks()  # validate per-block settings

    @property
    def voxel(self) -> VoxelConfig:
        return VoxelConfig(self.space_size, self.temporal_len)

    def blocks(self) -> list[SPABlockConfig]:
        out, c_prev = [], self.in_channels
        for c, s in zip(self.channels, self.strides):
            out.append(
                SPABlockConfig(self.variant, c_prev, c, self.k, s, self.k_t, self.dilations, self.branches, self.norm)
            )
            c_prev = c
        return out

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        for k in ("channels", "strides", "dilations"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SPANetConfig":
        return cls(**d)


def tiny_spa_config(num_classes: int, in_channels: int, variant: str = "4d") -> SPANetConfig:
    """Three stride-2 blocks, channels 16/32/64, s=32, T_max=16, k=3."""
    return SPANetConfig(num_classes, in_channels, variant, k=3)


def _canonical_order(x: SparseTensor4D) -> SparseTensor4D:
    if x.coalesced or is_coalesced(x):
        return x if x.coalesced else SparseTensor4D(x.R, x.F, x.batch, coalesced=True)
    order = np.lexsort((x.R[:, 3], x.R[:, 2], x.R[:, 1], x.R[:, 0], x.batch))
    F = ops.take(x.F, order, axis=0) if isinstance(x.F, Tensor) else x.F[order]
    out = SparseTensor4D(x.R[order], F, x.batch[order])
    if not is_coalesced(out):
        raise ValueError("SPANet: input has duplicate coordinates; coalesce it first")
    out.coalesced = True
    return out


class SPANet(Module):
    def __init__(self, cfg: SPANetConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.blocks = [make_block(b, rng) for b in cfg.blocks()]
        self.fc = Linear(cfg.channels[-1], cfg.num_classes, rng)

    def forward_with_activations(self, x: SparseTensor4D, timings: list | None = None):
        if x.num_points == 0:
            raise ValueError("SPANet: empty voxelization (input has zero points)")
        if x.num_channels != self.cfg.in_channels:
            raise ValueError(f"SPANet: input has {x.num_channels} channels, expected {self.cfg.in_channels}")
        batched = x.num_batches > 1 or bool(np.any(x.batch))
        h = _canonical_order(x)
        acts = []
        for i, blk in enumerate(self.blocks):
            t0 = time.perf_counter()
            h = blk(h)
            if timings is not None:
                timings.append({"block": i, "seconds": time.perf_counter() - t0, "active_points": h.num_points})
            acts.append(h)
        n = x.num_batches
        present = np.bincount(h.batch, minlength=n)
        if np.any(present == 0):
            raise ValueError(f"SPANet: empty voxelization for sample(s) {np.flatnonzero(present == 0).tolist()}")
        pooled = ops.segment_mean(h.feature_tensor(), h.batch, n)
        logits = self.fc(pooled)
        if not batched:
            logits = ops.reshape(logits, (self.cfg.num_classes,))
        return logits, acts

    def forward(self, x: SparseTensor4D):
        """Logits ``(B, K)`` for a batched tensor, ``(K,)`` for a single sample."""
        return self.forward_with_activations(x)[0]
