from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..autodiff import no_grad
from ..sparse import SparseTensor4D
from .net import SPANet


def activation_records(acts: list[SparseTensor4D], blocks=None) -> list[tuple]:
    """``(block, x, y, z, t, l2)`` per active point of each requested block."""
    blocks = range(len(acts)) if blocks is None else blocks
    rows = []
    for b in blocks:
        st = acts[b]
        mag = np.sqrt((st.features**2).sum(axis=1))
        for r, m in zip(st.R, mag):
            rows.append((int(b), int(r[0]), int(r[1]), int(r[2]), int(r[3]), float(m)))
    return rows


def write_activation_csv(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "x", "y", "z", "t", "l2"])
        for row in rows:
            w.writerow(list(row[:5]) + [repr(row[5])])


def dump_activations(model: SPANet, x: SparseTensor4D, csv_path, timing_path=None, blocks=None) -> list[tuple]:
    timings: list = []
    with no_grad():
        _, acts = model.forward_with_activations(x, timings)
    rows = activation_records(acts, blocks)
    write_activation_csv(csv_path, rows)
    if timing_path is not None:
        report = {"input_points": x.num_points, "blocks": timings}
        Path(timing_path).write_text(json.dumps(report, indent=1))
    return rows
