"""Sparse convolution and max-pooling over :class:`SparseTensor4D`.

For an output point at coordinate ``q`` (in the downsampled grid when
strided) and kernel offset ``delta``, the contributing input point is the
one at ``q * stride - delta``::

    F_out(q) = sum_delta W[delta] . F_in(q * stride - delta)

so the weight index is the relative position ``R(out) - R(in)`` at input
resolution. Missing neighbours contribute nothing. Output coordinates are the
input coordinates at stride 1 and the distinct ``floor(R / stride)`` otherwise.

Neighbour pairs are collected into a rulebook grouped by offset. Rulebooks
depend only on coordinates, so they are cached per sample and merged per
batch; within one offset group every input and every output appears at most
once, which keeps the scatter steps free of index collisions.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..autodiff import Module, Parameter, Tensor, as_tensor
from ..autodiff.nn import uniform_init
from .kernel import CoordinateIndex, KernelOffsets
from .tensor import SparseTensor4D, is_coalesced


@dataclass
class Rulebook:
    out_R: np.ndarray
    out_batch: np.ndarray
    groups: list[tuple[int, np.ndarray, np.ndarray]]  # (offset index, out rows, in rows)
    num_in: int

    @property
    def num_out(self) -> int:
        return len(self.out_R)

    @property
    def num_pairs(self) -> int:
        return int(sum(len(o) for _, o, _ in self.groups))


class _LRU:
    def __init__(self, maxsize: int):
        self.maxsize = maxsize
        self.data: OrderedDict = OrderedDict()

    def get(self, key):
        value = self.data.get(key)
        if value is not None:
            self.data.move_to_end(key)
        return value

    def put(self, key, value):
        self.data[key] = value
        self.data.move_to_end(key)
        while len(self.data) > self.maxsize:
            self.data.popitem(last=False)

    def clear(self):
        self.data.clear()


_sample_cache = _LRU(8192)
_batch_cache = _LRU(256)


def clear_rulebook_cache() -> None:
    _sample_cache.clear()
    _batch_cache.clear()


def _stride4(stride) -> tuple[int, int, int, int]:
    if isinstance(stride, (int, np.integer)):
        stride = (int(stride),) * 4
    stride = tuple(int(s) for s in stride)
    if len(stride) != 4 or any(s < 1 for s in stride):
        raise ValueError(f"stride must be a positive int or 4 positive ints, got {stride}")
    return stride


def downsample_coordinates(R: np.ndarray, stride) -> np.ndarray:
    """Distinct ``floor(R / stride)`` rows in lexicographic order."""
    s = np.array(_stride4(stride), dtype=np.int64)
    if np.all(s == 1) or len(R) == 0:
        return R
    return np.unique(np.floor_divide(R, s), axis=0)


def _sample_rulebook(R_in: np.ndarray, offsets: KernelOffsets, stride: tuple) -> tuple:
    key = (R_in.tobytes(), offsets.key(), stride)
    hit = _sample_cache.get(key)
    if hit is not None:
        return hit
    index = CoordinateIndex(R_in)
    R_out = downsample_coordinates(R_in, stride)
    base = R_out * np.array(stride, dtype=np.int64)
    probes = base[None, :, :] - offsets.offsets[:, None, :]  # (K, P_out, 4)
    found = index.lookup(probes)
    k_idx, o_idx = np.nonzero(found >= 0)
    i_idx = found[k_idx, o_idx]
    result = (R_out, k_idx, o_idx, i_idx)
    _sample_cache.put(key, result)
    return result


def _segments(batch: np.ndarray) -> list[tuple[int, int, int]]:
    if len(batch) == 0:
        return []
    cuts = np.flatnonzero(np.diff(batch)) + 1
    starts = np.concatenate([[0], cuts])
    ends = np.concatenate([cuts, [len(batch)]])
    return [(int(batch[s]), int(s), int(e)) for s, e in zip(starts, ends)]


def build_rulebook(x: SparseTensor4D, offsets: KernelOffsets, stride=1) -> Rulebook:
    """Neighbour pairs between ``x`` and its (possibly strided) output coordinates."""
    if not (x.coalesced or is_coalesced(x)):
        raise ValueError("sparse op: input must be coalesced (unique, lexicographically sorted rows)")
    stride = _stride4(stride)
    segs = _segments(x.batch)
    parts = [(b, s, e, _sample_rulebook(x.R[s:e], offsets, stride)) for b, s, e in segs]
    bkey = (tuple(id(p[3]) for p in parts), tuple((b, s) for b, s, _, _ in parts))
    hit = _batch_cache.get(bkey)
    if hit is not None and all(hit[1][i] is p[3] for i, p in enumerate(parts)):
        return hit[0]

    out_R, out_b, ks, os_, is_ = [], [], [], [], []
    out_base = 0
    for b, s, _, (R_out, k_idx, o_idx, i_idx) in parts:
        out_R.append(R_out)
        out_b.append(np.full(len(R_out), b, dtype=np.int64))
        ks.append(k_idx)
        os_.append(o_idx + out_base)
        is_.append(i_idx + s)
        out_base += len(R_out)
    if parts:
        out_R_a = np.concatenate(out_R)
        out_b_a = np.concatenate(out_b)
        k_all, o_all, i_all = np.concatenate(ks), np.concatenate(os_), np.concatenate(is_)
    else:
        out_R_a = np.zeros((0, 4), dtype=np.int64)
        out_b_a = np.zeros(0, dtype=np.int64)
        k_all = o_all = i_all = np.zeros(0, dtype=np.int64)
    order = np.argsort(k_all, kind="stable")
    k_all, o_all, i_all = k_all[order], o_all[order], i_all[order]
    groups = []
    if len(k_all):
        cuts = np.flatnonzero(np.diff(k_all)) + 1
        for s, e in zip(np.concatenate([[0], cuts]), np.concatenate([cuts, [len(k_all)]])):
            groups.append((int(k_all[s]), o_all[s:e], i_all[s:e]))
    rb = Rulebook(out_R_a, out_b_a, groups, x.num_points)
    _batch_cache.put(bkey, (rb, [p[3] for p in parts]))
    return rb


def sparse_conv(
    x: SparseTensor4D,
    weight,
    offsets: KernelOffsets,
    bias=None,
    stride=1,
) -> SparseTensor4D:
    """Sparse convolution; ``weight`` is ``(len(offsets), C_in, C_out)``."""
    W = as_tensor(weight)
    F = x.feature_tensor()
    if W.ndim != 3 or W.shape[0] != len(offsets):
        raise ValueError(f"sparse_conv: weight shape {W.shape} does not match {len(offsets)} kernel offsets")
    if W.shape[1] != F.shape[1]:
        raise ValueError(f"sparse_conv: input has {F.shape[1]} channels, weight expects {W.shape[1]}")
    rb = build_rulebook(x, offsets, stride)
    c_out = W.shape[2]
    out = np.zeros((rb.num_out, c_out))
    Fd, Wd = F.data, W.data
    for k, o, i in rb.groups:
        out[o] += Fd[i] @ Wd[k]
    parents = [F, W]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise ValueError(f"sparse_conv: bias {bias.shape} does not match {c_out} output channels")
        out += bias.data
        parents.append(bias)

    def bwd(g):
        gF = np.zeros_like(Fd)
        gW = np.zeros_like(Wd)
        for k, o, i in rb.groups:
            go = g[o]
            gW[k] += Fd[i].T @ go
            gF[i] += go @ Wd[k].T
        grads = [gF, gW]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    out_t = Tensor._from_op(out, parents, bwd, "sparse_conv")
    return SparseTensor4D(rb.out_R, out_t, rb.out_batch, coalesced=True)


def sparse_max_pool(x: SparseTensor4D, offsets: KernelOffsets, stride=1) -> SparseTensor4D:
    """Elementwise max over present neighbours; outputs with no neighbour are dropped."""
    F = x.feature_tensor()
    rb = build_rulebook(x, offsets, stride)
    C = F.shape[1]
    best = np.full((rb.num_out, C), -np.inf)
    arg = np.full((rb.num_out, C), -1, dtype=np.int64)
    Fd = F.data
    for _, o, i in rb.groups:
        cand = Fd[i]
        cur = best[o]
        better = cand > cur
        best[o] = np.where(better, cand, cur)
        arg[o] = np.where(better, i[:, None], arg[o])
    keep = arg[:, 0] >= 0 if C else np.zeros(rb.num_out, dtype=bool)
    if C and not np.all(keep == np.all(arg >= 0, axis=1)):
        raise AssertionError("sparse_max_pool: inconsistent neighbour coverage")
    best, arg = best[keep], arg[keep]
    n_in = Fd.shape[0]
    flat = (arg * C + np.arange(C)[None, :]).ravel()

    def bwd(g):
        gF = np.bincount(flat, weights=g.ravel(), minlength=n_in * C)
        return (gF.reshape(n_in, C),)

    out_t = Tensor._from_op(best, (F,), bwd, "sparse_max_pool")
    return SparseTensor4D(rb.out_R[keep], out_t, rb.out_batch[keep], coalesced=True)


class SparseConv(Module):
    """Learnable sparse convolution layer."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        offsets: KernelOffsets,
        rng: np.random.Generator,
        stride=1,
        bias: bool = True,
    ):
        self.offsets = offsets
        self.stride = _stride4(stride)
        fan_in = in_channels * len(offsets)
        self.weight = Parameter(uniform_init(rng, (len(offsets), in_channels, out_channels), fan_in), "weight")
        self.bias = Parameter(np.zeros(out_channels), "bias") if bias else None

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[2]

    def forward(self, x: SparseTensor4D) -> SparseTensor4D:
        return sparse_conv(x, self.weight, self.offsets, self.bias, self.stride)
