from __future__ import annotations

import numpy as np


def fuse_scores(scores) -> np.ndarray:
    """Elementwise mean of probability vectors (one row per stream)."""
    arrs = [np.asarray(s, dtype=np.float64) for s in scores]
    if len(arrs) < 1:
        raise ValueError("fuse_scores: no score vectors given")
    K = arrs[0].shape
    for a in arrs:
        if a.shape != K:
            raise ValueError(f"fuse_scores: length mismatch {a.shape} vs {K}")
        if np.any(a < 0) or np.any(np.abs(a.sum(axis=-1) - 1.0) > 1e-9):
            raise ValueError("fuse_scores: inputs must be probability vectors (nonnegative, summing to 1)")
    total = arrs[0].copy()
    for a in arrs[1:]:
        total += a
    return total / len(arrs)


def fuse_score_maps(maps: list[dict]) -> dict:
    """Fuse ``{sample_id: probs}`` maps from independently trained streams."""
    if len(maps) < 2:
        raise ValueError("fuse: at least two score files are required")
    ids = list(maps[0])
    for m in maps[1:]:
        if set(m) != set(ids):
            raise ValueError("fuse: score files cover different sample ids")
    return {sid: fuse_scores([m[sid] for m in maps]).tolist() for sid in ids}
