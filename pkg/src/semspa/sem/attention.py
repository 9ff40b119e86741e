"""Joint self-attention variants over skeleton features.

All functions take ``x`` shaped ``(N, T, C)`` or batched ``(B, N, T, C)``
(joints, frames, channels) and return the same layout. Heads carry no value
projection: the aggregation mixes the raw input features.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Module, Parameter, Tensor, as_tensor, ops
from ..autodiff.nn import Linear


class GRCFSAParams(Module):
    """One attention head: embeddings ``f1, f2: C_in -> C_e``, prior ``alpha_hat`` and gain ``beta``."""

    def __init__(self, c_in: int, c_e: int, num_joints: int, rng: np.random.Generator):
        self.c_in = c_in
        self.c_e = c_e
        self.num_joints = num_joints
        self.f1 = Linear(c_in, c_e, rng)
        self.f2 = Linear(c_in, c_e, rng)
        # zero prior and unit gain: training starts at plain cross-frame attention
        self.alpha_hat = Parameter(np.zeros((num_joints, num_joints)), "alpha_hat")
        self.beta = Parameter(np.array(1.0), "beta")

    def forward(self, x):
        return gr_cfsa_forward(x, self)


def _batched(x, params: GRCFSAParams, op: str) -> tuple[Tensor, bool]:
    x = as_tensor(x)
    if x.ndim == 3:
        x, squeeze = ops.reshape(x, (1,) + x.shape), True
    elif x.ndim == 4:
        squeeze = False
    else:
        raise ValueError(f"{op}: expected (N, T, C) or (B, N, T, C) input, got {x.shape}")
    if x.shape[-1] != params.c_in:
        raise ValueError(f"{op}: input has {x.shape[-1]} channels, head expects {params.c_in}")
    return x, squeeze


def _unbatch(y: Tensor, squeeze: bool) -> Tensor:
    return ops.reshape(y, y.shape[1:]) if squeeze else y


def _embed(x: Tensor, params: GRCFSAParams) -> tuple[Tensor, Tensor]:
    return params.f1(x), params.f2(x)


def attention_unified(x, params: GRCFSAParams) -> Tensor:
    """Softmax attention over all ``T * N`` joint instances as one sequence."""
    x, squeeze = _batched(x, params, "attention_unified")
    B, N, T, C = x.shape
    e1, e2 = _embed(x, params)
    e1 = ops.reshape(e1, (B, N * T, params.c_e))
    e2 = ops.reshape(e2, (B, N * T, params.c_e))
    alpha = ops.einsum("bic,bjc->bij", e1, e2)
    a = ops.softmax(ops.scale(alpha, 1.0 / np.sqrt(params.c_e)), axis=-1)
    y = ops.einsum("bij,bjc->bic", a, ops.reshape(x, (B, N * T, C)))
    return _unbatch(ops.reshape(y, (B, N, T, C)), squeeze)


def attention_single_frame(x, params: GRCFSAParams) -> Tensor:
    """Per-frame attention over joints; weights use only that frame's embeddings."""
    x, squeeze = _batched(x, params, "attention_single_frame")
    e1, e2 = _embed(x, params)
    alpha = ops.einsum("bntc,bmtc->btnm", e1, e2)
    a = ops.softmax(ops.scale(alpha, 1.0 / np.sqrt(params.c_e)), axis=-1)
    return _unbatch(ops.einsum("btnm,bmtc->bntc", a, x), squeeze)


def _cross_frame_alpha(x: Tensor, params: GRCFSAParams) -> Tensor:
    e1, e2 = _embed(x, params)
    g1 = ops.sum(e1, axis=2)
    g2 = ops.sum(e2, axis=2)
    return ops.einsum("bnc,bmc->bnm", g1, g2)


def attention_cross_frame_weights(x, params: GRCFSAParams) -> Tensor:
    """Frame-independent ``N x N`` weights from frame-summed embeddings (pre-softmax)."""
    x, squeeze = _batched(x, params, "attention_cross_frame_weights")
    alpha = _cross_frame_alpha(x, params)
    return ops.reshape(alpha, alpha.shape[1:]) if squeeze else alpha


def _aggregate(alpha: Tensor, x: Tensor, c_e: int) -> Tensor:
    a = ops.softmax(ops.scale(alpha, 1.0 / np.sqrt(c_e)), axis=-1)
    return ops.einsum("bnm,bmtc->bntc", a, x)


def attention_cross_frame(x, params: GRCFSAParams) -> Tensor:
    """Cross-frame attention: one shared weight matrix applied to every frame."""
    x, squeeze = _batched(x, params, "attention_cross_frame")
    return _unbatch(_aggregate(_cross_frame_alpha(x, params), x, params.c_e), squeeze)


def _gr_alpha(x: Tensor, params: GRCFSAParams) -> Tensor:
    N = x.shape[1]
    if params.alpha_hat.shape != (N, N):
        raise ValueError(f"gr_cfsa: alpha_hat is {params.alpha_hat.shape}, input has {N} joints")
    return ops.add(ops.mul(_cross_frame_alpha(x, params), params.beta), params.alpha_hat)


def gr_cfsa_forward(x, params: GRCFSAParams) -> Tensor:
    """Cross-frame attention with learned gain ``beta`` and joint-pair prior ``alpha_hat``.

    ``alpha = beta * g1 g2^T + alpha_hat``; the ``1/sqrt(C_e)`` scaling is
    applied to the whole sum before the softmax over ``n2``.
    """
    x, squeeze = _batched(x, params, "gr_cfsa_forward")
    return _unbatch(_aggregate(_gr_alpha(x, params), x, params.c_e), squeeze)


def gr_cfsa_attention_matrix(x, params: GRCFSAParams) -> np.ndarray:
    """Softmaxed ``N x N`` (or ``B x N x N``) weights of ``gr_cfsa_forward``."""
    xb, squeeze = _batched(x, params, "gr_cfsa_attention_matrix")
    alpha = _gr_alpha(xb, params)
    a = ops.softmax(ops.scale(alpha, 1.0 / np.sqrt(params.c_e)), axis=-1).data
    return a[0] if squeeze else a


VARIANTS = {
    "unified": attention_unified,
    "single_frame": attention_single_frame,
    "cross_frame": attention_cross_frame,
    "gr_cfsa": gr_cfsa_forward,
}
