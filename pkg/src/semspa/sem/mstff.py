from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Module, Parameter, Tensor, as_tensor, ops
from ..autodiff.nn import Linear, uniform_init


@dataclass
class MSTFFConfig:
    c_in: int
    c_out: int
    branches: int = 4
    kernel: int = 3
    dilations: tuple[int, ...] = field(default=(1, 3, 5, 7))
    stride: int = 1

    def __post_init__(self):
        self.dilations = tuple(int(d) for d in self.dilations)
        if self.branches < 1:
            raise ValueError(f"MSTFFConfig: branches must be positive, got {self.branches}")
        if len(self.dilations) != self.branches:
            raise ValueError(f"MSTFFConfig: {len(self.dilations)} dilations for {self.branches} branches")
        if any(d < 1 for d in self.dilations):
            raise ValueError(f"MSTFFConfig: dilations must be positive, got {self.dilations}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"MSTFFConfig: kernel must be odd and positive, got {self.kernel}")
        if self.c_out % self.branches:
            raise ValueError(f"MSTFFConfig: c_out={self.c_out} not divisible by branches={self.branches}")
        if self.stride not in (1, 2):
            raise ValueError(f"MSTFFConfig: stride must be 1 or 2, got {self.stride}")

    @property
    def branch_width(self) -> int:
        return self.c_out // self.branches

    def receptive_fields(self) -> list[int]:
        return [(self.kernel - 1) * d + 1 for d in self.dilations]


class MSTFF(Module):
    """Multi-scale temporal feed-forward.

    A pointwise map ``C_in -> C_out`` is split into ``B`` channel groups;
    group ``b`` goes through a temporal convolution with dilation ``d_b``
    and the results are concatenated. Joints are never mixed.
    """

    def __init__(self, cfg: MSTFFConfig, rng: np.random.Generator):
        self.cfg = cfg
        w = cfg.branch_width
        self.pointwise = Linear(cfg.c_in, cfg.c_out, rng)
        self.temporal = [
            Parameter(uniform_init(rng, (cfg.kernel, w, w), cfg.kernel * w), f"temporal{b}")
            for b in range(cfg.branches)
        ]
        self.temporal_bias = [Parameter(np.zeros(w), f"temporal_bias{b}") for b in range(cfg.branches)]

    def forward(self, x) -> Tensor:
        return ms_tff_forward(x, self)


def ms_tff_forward(x, module: MSTFF) -> Tensor:
    cfg = module.cfg
    x = as_tensor(x)
    if x.ndim < 3 or x.shape[-1] != cfg.c_in:
        raise ValueError(f"ms_tff_forward: expected (..., N, T, {cfg.c_in}) input, got {x.shape}")
    h = module.pointwise(x)
    parts = ops.split(h, cfg.branches, axis=-1)
    outs = [
        ops.conv1d(p, w, b, stride=cfg.stride, dilation=d)
        for p, w, b, d in zip(parts, module.temporal, module.temporal_bias, cfg.dilations)
    ]
    return outs[0] if len(outs) == 1 else ops.concat(outs, axis=-1)
