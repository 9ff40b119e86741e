"""Sparse spatio-temporal residual blocks.

Both variants split the output channels into ``B`` branches whose temporal
kernels use dilations ``d_b``. SPA-4D convolves space and time jointly with
``(k, k, k, k_t)`` kernels; SPA-3+1D runs a ``(k, k, k, 1)`` spatial conv and
then per-branch ``(1, 1, 1, k_t)`` temporal convs.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..autodiff import Module, ops
from ..autodiff.nn import RunningNorm
from ..sparse import KernelOffsets, SparseConv, SparseTensor4D

VARIANTS = ("4d", "3+1d")


@dataclass
class SPABlockConfig:
    variant: str
    c_in: int
    c_out: int
    k: int = 5
    stride: int = 1
    k_t: int = 3
    dilations: tuple[int, ...] = (1, 3, 5, 7)
    branches: int = 4
    norm: bool = False
    mid_relu: bool = True  # 3+1D only: relu between the spatial and temporal stages

    def __post_init__(self):
        self.variant = self.variant.lower()
        self.dilations = tuple(int(d) for d in self.dilations)
        if self.variant not in VARIANTS:
            raise ValueError(f"SPABlockConfig: variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.k < 1 or self.k_t < 1:
            raise ValueError(f"SPABlockConfig: kernel sizes must be >= 1, got k={self.k}, k_t={self.k_t}")
        if self.branches < 1 or len(self.dilations) != self.branches:
            raise ValueError(f"SPABlockConfig: {len(self.dilations)} dilations for {self.branches} branches")
        if self.c_out % self.branches:
            raise ValueError(f"SPABlockConfig: c_out={self.c_out} not divisible by branches={self.branches}")
        if self.stride < 1:
            raise ValueError(f"SPABlockConfig: stride must be >= 1, got {self.stride}")

    @property
    def spatial_stride(self) -> tuple[int, int, int, int]:
        return (self.stride, self.stride, self.stride, 1)

    def to_json(self) -> dict:
        d = asdict(self)
        d["dilations"] = list(d["dilations"])
        return d


def _residual(cfg: SPABlockConfig, rng: np.random.Generator):
    if cfg.c_in == cfg.c_out and cfg.stride == 1:
        return None
    # kernel equal to the stride covers exactly the cells merged into each output
    s = cfg.stride
    return SparseConv(cfg.c_in, cfg.c_out, KernelOffsets((s, s, s, 1)), rng, stride=cfg.spatial_stride, bias=False)


def _relu(x: SparseTensor4D) -> SparseTensor4D:
    return x.with_features(ops.relu(x.feature_tensor()))


class _Base(Module):
    cfg: SPABlockConfig

    def _norm(self, x: SparseTensor4D, layer) -> SparseTensor4D:
        return x if layer is None else x.with_features(layer(x.feature_tensor()))

    def _finish(self, x: SparseTensor4D, h: SparseTensor4D) -> SparseTensor4D:
        h = _relu(self._norm(h, self.norm_out))
        res = x if self.residual is None else self.residual(x)
        if res.num_points != h.num_points or not np.array_equal(res.R, h.R):
            raise AssertionError("SPA block: residual and main path coordinates differ")
        return h.with_features(ops.add(h.feature_tensor(), res.feature_tensor()))

    def _check(self, x: SparseTensor4D) -> None:
        if x.num_channels != self.cfg.c_in:
            raise ValueError(f"SPA block: input has {x.num_channels} channels, expected {self.cfg.c_in}")


class SPA4DBlock(_Base):
    """Branch ``b``: sparse conv with kernel ``(k, k, k, k_t)`` and temporal dilation ``d_b``."""

    def __init__(self, cfg: SPABlockConfig, rng: np.random.Generator):
        if cfg.variant != "4d":
            raise ValueError(f"SPA4DBlock: config variant is {cfg.variant!r}")
        self.cfg = cfg
        w = cfg.c_out // cfg.branches
        self.branches = [
            SparseConv(cfg.c_in, w, KernelOffsets.cube(cfg.k, cfg.k_t, d), rng, stride=cfg.spatial_stride)
            for d in cfg.dilations
        ]
        self.norm_out = RunningNorm(cfg.c_out) if cfg.norm else None
        self.residual = _residual(cfg, rng)

    def forward(self, x: SparseTensor4D) -> SparseTensor4D:
        self._check(x)
        if x.num_points == 0:
            return _empty(x, self.cfg.c_out)
        outs = [conv(x) for conv in self.branches]
        h = outs[0] if len(outs) == 1 else outs[0].with_features(ops.concat([o.feature_tensor() for o in outs], axis=-1))
        return self._finish(x, h)


class SPA3p1DBlock(_Base):
    """Spatial ``(k, k, k, 1)`` conv, then per-branch ``(1, 1, 1, k_t)`` temporal convs."""

    def __init__(self, cfg: SPABlockConfig, rng: np.random.Generator):
        if cfg.variant != "3+1d":
            raise ValueError(f"SPA3p1DBlock: config variant is {cfg.variant!r}")
        self.cfg = cfg
        w = cfg.c_out // cfg.branches
        self.spatial = SparseConv(cfg.c_in, cfg.c_out, KernelOffsets.cube(cfg.k), rng, stride=cfg.spatial_stride)
        self.temporal = [SparseConv(w, w, KernelOffsets.temporal(cfg.k_t, d), rng) for d in cfg.dilations]
        self.norm_mid = RunningNorm(cfg.c_out) if cfg.norm else None
        self.norm_out = RunningNorm(cfg.c_out) if cfg.norm else None
        self.residual = _residual(cfg, rng)

    def spatial_stage(self, x: SparseTensor4D) -> SparseTensor4D:
        h = self._norm(self.spatial(x), self.norm_mid)
        return _relu(h) if self.cfg.mid_relu else h

    def forward(self, x: SparseTensor4D) -> SparseTensor4D:
        self._check(x)
        if x.num_points == 0:
            return _empty(x, self.cfg.c_out)
        h = self.spatial_stage(x)
        parts = ops.split(h.feature_tensor(), self.cfg.branches, axis=-1)
        outs = [conv(h.with_features(p)).feature_tensor() for conv, p in zip(self.temporal, parts)]
        t = h.with_features(outs[0] if len(outs) == 1 else ops.concat(outs, axis=-1))
        return self._finish(x, t)


def _empty(x: SparseTensor4D, c_out: int) -> SparseTensor4D:
    return SparseTensor4D(np.zeros((0, 4), dtype=np.int64), np.zeros((0, c_out)), np.zeros(0, dtype=np.int64), True)


def make_block(cfg: SPABlockConfig, rng: np.random.Generator):
    return SPA4DBlock(cfg, rng) if cfg.variant == "4d" else SPA3p1DBlock(cfg, rng)


def main_path_parameter_count(cfg: SPABlockConfig) -> int:
    """Convolution weights of the main path (no biases, norms or residual projection)."""
    if cfg.variant == "4d":
        return cfg.k**3 * cfg.k_t * cfg.c_in * cfg.c_out
    w = cfg.c_out // cfg.branches
    return cfg.k**3 * cfg.c_in * cfg.c_out + cfg.branches * cfg.k_t * w * w
