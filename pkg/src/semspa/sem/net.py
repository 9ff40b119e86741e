"""SEM blocks and the stacked SEM-Net classifier."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..autodiff import Module, Tensor, as_tensor, ops
from ..autodiff.nn import Linear
from .attention import GRCFSAParams, gr_cfsa_forward
from .mstff import MSTFF, MSTFFConfig


@dataclass
class SEMBlockConfig:
    c_in: int
    c_out: int
    num_joints: int
    heads: int = 4
    c_e: int = 16
    branches: int = 4
    kernel: int = 3
    dilations: tuple[int, ...] = (1, 3, 5, 7)
    stride: int = 1
    layer_norm: bool = False

    def __post_init__(self):
        if self.heads < 1:
            raise ValueError(f"SEMBlockConfig: heads must be positive, got {self.heads}")
        if min(self.c_in, self.c_out, self.c_e, self.num_joints) < 1:
            raise ValueError("SEMBlockConfig: sizes must be positive")

    def mstff(self) -> MSTFFConfig:
        return MSTFFConfig(self.c_in, self.c_out, self.branches, self.kernel, self.dilations, self.stride)


class SEMBlock(Module):
    """``S`` GR-CFSA heads, concat, linear mix and residual; then MS-TFF with residual.

    ``y1 = x + W(concat_s head_s(x))`` and ``y2 = P(y1) + relu(MSTFF(y1))``
    where ``P`` is the identity, or a pointwise projection on the frames kept
    by the temporal stride when channels or stride change.
    """

    def __init__(self, cfg: SEMBlockConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.heads = [GRCFSAParams(cfg.c_in, cfg.c_e, cfg.num_joints, rng) for _ in range(cfg.heads)]
        # heads aggregate raw C_in features, so the mix maps S*C_in back to C_in
        self.mix = Linear(cfg.heads * cfg.c_in, cfg.c_in, rng)
        self.mstff = MSTFF(cfg.mstff(), rng)
        self.project = None
        if cfg.c_in != cfg.c_out or cfg.stride != 1:
            self.project = Linear(cfg.c_in, cfg.c_out, rng, bias=False)

    def residual(self, y1: Tensor) -> Tensor:
        if self.project is None:
            return y1
        if self.cfg.stride != 1:
            y1 = ops.take(y1, np.arange(0, y1.shape[-2], self.cfg.stride), axis=y1.ndim - 2)
        return self.project(y1)

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        if x.ndim not in (3, 4) or x.shape[-1] != self.cfg.c_in or x.shape[-3] != self.cfg.num_joints:
            raise ValueError(
                f"SEMBlock: expected (..., {self.cfg.num_joints}, T, {self.cfg.c_in}) input, got {x.shape}"
            )
        heads = [gr_cfsa_forward(x, h) for h in self.heads]
        h = heads[0] if len(heads) == 1 else ops.concat(heads, axis=-1)
        y1 = ops.add(x, self.mix(h))
        if self.cfg.layer_norm:
            y1 = ops.layer_norm(y1)
        y2 = ops.add(self.residual(y1), ops.relu(self.mstff(y1)))
        if self.cfg.layer_norm:
            y2 = ops.layer_norm(y2)
        return y2


@dataclass
class SEMNetConfig:
    num_joints: int
    num_classes: int
    in_channels: int = 3
    channels: tuple[int, ...] = (32, 64, 64)
    strides: tuple[int, ...] = (1, 2, 1)
    heads: int = 4
    c_e: int = 16
    branches: int = 4
    kernel: int = 3
    dilations: tuple[int, ...] = field(default=(1, 3, 5, 7))
    layer_norm: bool = False

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.strides = tuple(int(s) for s in self.strides)
        self.dilations = tuple(int(d) for d in self.dilations)
        if not self.channels:
            raise ValueError("SEMNetConfig: at least one block required")
        if len(self.strides) != len(self.channels):
            raise ValueError(f"SEMNetConfig: {len(self.strides)} strides for {len(self.channels)} blocks")
        if self.num_classes < 2:
            raise ValueError(f"SEMNetConfig: need at least 2 classes, got {self.num_classes}")

    def blocks(self) -> list[SEMBlockConfig]:
        c_prev = self.in_channels
        out = []
        for c, s in zip(self.channels, self.strides):
            out.append(
                SEMBlockConfig(
                    c_prev, c, self.num_joints, self.heads, self.c_e, self.branches,
                    self.kernel, self.dilations, s, self.layer_norm,
                )
            )
            c_prev = c
        return out

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("channels", "strides", "dilations"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SEMNetConfig":
        return cls(**d)


def tiny_sem_config(num_joints: int, num_classes: int) -> SEMNetConfig:
    """Two blocks, two heads, C_e=8, channels 16 -> 32."""
    return SEMNetConfig(num_joints, num_classes, channels=(16, 32), strides=(1, 1), heads=2, c_e=8)


class SEMNet(Module):
    def __init__(self, cfg: SEMNetConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.blocks = [SEMBlock(b, rng) for b in cfg.blocks()]
        self.fc = Linear(cfg.channels[-1], cfg.num_classes, rng)

    def features(self, x) -> Tensor:
        h = as_tensor(x)
        for blk in self.blocks:
            h = blk(h)
        return h

    def forward(self, x) -> Tensor:
        """Logits ``(B, K)`` for ``(B, N, T, C)`` input, or ``(K,)`` for ``(N, T, C)``."""
        x = as_tensor(x)
        if x.ndim not in (3, 4) or x.shape[-1] != self.cfg.in_channels:
            raise ValueError(f"SEMNet: expected (..., N, T, {self.cfg.in_channels}) input, got {x.shape}")
        h = self.features(x)
        pooled = ops.mean(h, axis=(-3, -2))
        return self.fc(pooled)
