from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..autodiff import as_tensor, no_grad
from .attention import gr_cfsa_attention_matrix
from .net import SEMNet


def attention_matrix(model: SEMNet, x: np.ndarray, block: int, head: int) -> np.ndarray:
    """Softmaxed ``N x N`` weights of one head for one ``(N, T, C)`` sample."""
    if not 0 <= block < len(model.blocks):
        raise ValueError(f"attention export: block {block} out of range [0, {len(model.blocks)})")
    blk = model.blocks[block]
    if not 0 <= head < len(blk.heads):
        raise ValueError(f"attention export: head {head} out of range [0, {len(blk.heads)})")
    with no_grad():
        h = as_tensor(x)
        for b in model.blocks[:block]:
            h = b(h)
        return gr_cfsa_attention_matrix(h, blk.heads[head])


def top_pairs(weights: np.ndarray, k: int = 50) -> list[tuple[int, int, float]]:
    """The ``k`` largest entries as ``(n1, n2, weight)``; ties broken by row-major index."""
    flat = weights.reshape(-1)
    order = np.lexsort((np.arange(flat.size), -flat))[:k]
    n = weights.shape[1]
    return [(int(i // n), int(i % n), float(flat[i])) for i in order]


def write_attention_csv(path, weights: np.ndarray, k: int = 50) -> list[tuple[int, int, float]]:
    rows = top_pairs(weights, k)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n1", "n2", "weight"])
        for n1, n2, v in rows:
            w.writerow([n1, n2, repr(v)])
    return rows
