"""Finite-difference checks for every trainable layer, on several seeds.

Each check builds a small instance, contracts its output with a fixed random
probe to get a scalar, and compares recorded gradients (inputs and
parameters) against central differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..autodiff import GradCheckReport, Tensor, grad_check_params, ops
from ..autodiff.nn import Linear
from ..sem import MSTFF, GRCFSAParams, MSTFFConfig, SEMBlock, SEMBlockConfig
from ..sem.attention import VARIANTS
from ..sparse import KernelOffsets, SparseConv, coalesce, sparse_max_pool
from ..spa import SPA3p1DBlock, SPA4DBlock, SPABlockConfig
from .metrics import cross_entropy


@dataclass
class SuiteResult:
    name: str
    seed: int
    report: GradCheckReport

    @property
    def passed(self) -> bool:
        return self.report.passed


def _input(rng, shape, scale=0.5) -> Tensor:
    t = Tensor(rng.normal(size=shape) * scale, requires_grad=True)
    t.name = "input"
    return t


def _probe_loss(fn: Callable[[], Tensor], rng) -> Callable[[], Tensor]:
    probe = rng.normal(size=fn().shape)
    return lambda: ops.sum(ops.mul(fn(), probe))


def _attention(variant):
    def build(rng):
        head = GRCFSAParams(3, 2, 4, rng)
        head.alpha_hat.data[...] = rng.normal(size=(4, 4)) * 0.5
        head.beta.data[...] = 0.5 + rng.uniform()
        x = _input(rng, (4, 3, 3))
        return _probe_loss(lambda: VARIANTS[variant](x, head), rng), [x] + head.parameters()

    return build


def _mstff(rng):
    m = MSTFF(MSTFFConfig(3, 4, 2, 3, (1, 3), stride=2), rng)
    x = _input(rng, (2, 6, 3))
    return _probe_loss(lambda: m(x), rng), [x] + m.parameters()


def _sem_block(rng):
    blk = SEMBlock(SEMBlockConfig(4, 6, 3, heads=2, c_e=3, branches=2, dilations=(1, 2), stride=2), rng)
    for h in blk.heads:
        h.alpha_hat.data[...] = rng.normal(size=(3, 3)) * 0.5
    x = _input(rng, (3, 5, 4))
    return _probe_loss(lambda: blk(x), rng), [x] + blk.parameters()


def _cloud(rng, n=8, c=3):
    R = np.column_stack([rng.integers(0, 4, size=n) for _ in range(4)])
    st = coalesce(R, rng.normal(size=(n, c)))
    feats = Tensor(st.features.copy(), requires_grad=True)
    feats.name = "features"
    return st, feats


def _sparse_conv(rng):
    st, feats = _cloud(rng)
    conv = SparseConv(3, 2, KernelOffsets.cube(3, 3), rng, stride=(2, 2, 2, 1))
    conv.bias.data[...] = rng.normal(size=2)
    return _probe_loss(lambda: conv(st.with_features(feats)).feature_tensor(), rng), [feats] + conv.parameters()


def _sparse_pool(rng):
    st, feats = _cloud(rng)
    # distinct values keep the max away from ties, where it is not differentiable
    feats.data[...] = rng.permutation(feats.data.size).reshape(feats.shape) * 0.1
    fn = lambda: sparse_max_pool(st.with_features(feats), KernelOffsets.cube(3, 3), stride=2).feature_tensor()  # noqa: E731
    return _probe_loss(fn, rng), [feats]


def _spa(variant):
    def build(rng):
        cfg = SPABlockConfig(variant, 3, 4, k=3, stride=2, k_t=3, dilations=(1, 2), branches=2)
        blk = SPA4DBlock(cfg, rng) if variant == "4d" else SPA3p1DBlock(cfg, rng)
        for name, p in blk.named_parameters():
            if name.endswith("bias"):
                p.data[...] = rng.normal(size=p.shape) * 0.1
        st, feats = _cloud(rng)
        return _probe_loss(lambda: blk(st.with_features(feats)).feature_tensor(), rng), [feats] + blk.parameters()

    return build


def _fc_head(rng):
    fc = Linear(5, 3, rng)
    x = _input(rng, (4, 5))
    return _probe_loss(lambda: fc(x), rng), [x] + fc.parameters()


def _loss(rng):
    logits = _input(rng, (5, 4), scale=2.0)
    labels = rng.integers(0, 4, size=5)
    return (lambda: cross_entropy(logits, labels)), [logits]


CHECKS: dict[str, Callable] = {
    "attention_unified": _attention("unified"),
    "attention_single_frame": _attention("single_frame"),
    "attention_cross_frame": _attention("cross_frame"),
    "gr_cfsa": _attention("gr_cfsa"),
    "ms_tff": _mstff,
    "sem_block": _sem_block,
    "sparse_conv": _sparse_conv,
    "sparse_max_pool": _sparse_pool,
    "spa_4d_block": _spa("4d"),
    "spa_3p1d_block": _spa("3+1d"),
    "fc_head": _fc_head,
    "cross_entropy": _loss,
}


def run_suite(seeds=(0, 1, 2), tol: float = 1e-5, names=None, log=None) -> list[SuiteResult]:
    results = []
    for name in names or CHECKS:
        for seed in seeds:
            rng = np.random.default_rng(seed)
            loss_fn, targets = CHECKS[name](rng)
            for t in targets:
                if t.grad is None:
                    t.grad = np.zeros_like(t.data)
            report = grad_check_params(loss_fn, targets, tol=tol)
            results.append(SuiteResult(name, seed, report))
            if log is not None:
                log(f"{name:24s} seed {seed}: {report}")
    return results


__all__ = ["CHECKS", "SuiteResult", "run_suite"]
