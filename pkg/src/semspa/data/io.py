"""Canonical JSON/JSONL dataset format and raw-dataset adapters.

Canonical layout of a dataset directory::

    dataset.json   {"num_joints": N, "joint_names": [...], "edges": [[p, c], ...],
                    "classes": [...], "max_persons": M}
    samples.jsonl  one object per line:
                   {"id": str, "label": int, "coords": [persons][frames][joints][3]}
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .skeleton import SkeletonDataset, SkeletonSequence, SkeletonTopology


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def _topology_from_json(meta: dict) -> SkeletonTopology:
    n = int(meta["num_joints"])
    names = meta.get("joint_names") or [f"j{i}" for i in range(n)]
    return SkeletonTopology(n, list(names), [tuple(e) for e in meta.get("edges", [])])


def _sample_from_json(obj: dict, topo: SkeletonTopology, max_persons: int, n_classes: int) -> SkeletonSequence:
    sid = str(obj.get("id", ""))
    try:
        coords = np.asarray(obj["coords"], dtype=np.float64)
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"sample {sid!r}: unreadable coords ({exc})") from None
    if coords.ndim != 4 or coords.shape[-1] != 3:
        raise DataError(f"sample {sid!r}: coords must nest persons/frames/joints/xyz, got shape {coords.shape}")
    if coords.shape[2] != topo.num_joints:
        raise DataError(f"sample {sid!r}: {coords.shape[2]} joints, topology has {topo.num_joints}")
    if coords.shape[0] > max_persons:
        raise DataError(f"sample {sid!r}: {coords.shape[0]} persons exceeds max_persons={max_persons}")
    if not np.isfinite(coords).all():
        raise DataError(f"sample {sid!r}: non-finite coordinates")
    label = int(obj.get("label", 0))
    if n_classes and not 0 <= label < n_classes:
        raise DataError(f"sample {sid!r}: label {label} outside [0, {n_classes})")
    valid = np.any(coords != 0.0, axis=(2, 3))
    seq = SkeletonSequence(coords, label, sid, valid)
    return seq.pad_persons(max_persons)


def load_canonical(path) -> SkeletonDataset:
    root = Path(path)
    try:
        meta = json.loads((root / "dataset.json").read_text())
    except FileNotFoundError:
        raise DataError(f"{root}: missing dataset.json") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{root / 'dataset.json'}: invalid JSON ({exc})") from None
    try:
        topo = _topology_from_json(meta)
    except (KeyError, ValueError) as exc:
        raise DataError(f"{root / 'dataset.json'}: bad topology ({exc})") from None
    classes = list(meta.get("classes", []))
    max_persons = int(meta.get("max_persons", 1))
    seqs = []
    samples = root / "samples.jsonl"
    if samples.exists():
        with open(samples) as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{samples}:{lineno}: malformed JSON ({exc.msg})") from None
                seqs.append(_sample_from_json(obj, topo, max_persons, len(classes)))
    return SkeletonDataset(topo, seqs, classes, max_persons)


def save_canonical(dataset: SkeletonDataset, path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = dataset.topology.to_json()
    meta["classes"] = list(dataset.class_names)
    meta["max_persons"] = dataset.max_persons
    (root / "dataset.json").write_text(json.dumps(meta, indent=1))
    with open(root / "samples.jsonl", "w") as fh:
        for s in dataset.sequences:
            fh.write(json.dumps({"id": s.id, "label": int(s.label), "coords": s.coords.tolist()}) + "\n")


class _Lines:
    def __init__(self, blob: bytes, path):
        self.path = path
        self.lines = []
        offset = 0
        for raw in blob.splitlines(keepends=True):
            if raw.strip():
                self.lines.append((offset, raw.decode().split()))
            offset += len(raw)
        self.end = offset
        self.pos = 0

    def next(self) -> list[str]:
        if self.pos >= len(self.lines):
            raise DataError(f"{self.path}: truncated file at byte offset {self.end}")
        self.pos += 1
        return self.lines[self.pos - 1][1]

    def offset(self) -> int:
        return self.lines[self.pos - 1][0] if self.pos else 0


def motion_energy(coords: np.ndarray, present: np.ndarray) -> float:
    """Sum of squared frame-to-frame deltas over consecutive present frames."""
    both = present[1:] & present[:-1]
    d = coords[1:] - coords[:-1]
    return float((d[both] ** 2).sum())


def parse_ntu_skeleton(path, max_persons: int = 2, num_joints: int = 25, label: int | None = None) -> SkeletonSequence:
    """Read one ``.skeleton`` file from the NTU RGB+D release."""
    path = Path(path)
    lines = _Lines(path.read_bytes(), path)
    if not lines.lines:
        raise DataError(f"{path}: empty sequence")
    T = int(lines.next()[0])
    if T <= 0:
        raise DataError(f"{path}: empty sequence")
    bodies: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    order: list[str] = []
    for t in range(T):
        n_bodies = int(lines.next()[0])
        for _ in range(n_bodies):
            body_id = lines.next()[0]
            n_j = int(lines.next()[0])
            if n_j != num_joints:
                raise DataError(f"{path}: body with {n_j} joints at byte offset {lines.offset()}, expected {num_joints}")
            if body_id not in bodies:
                bodies[body_id] = (np.zeros((T, num_joints, 3)), np.zeros(T, dtype=bool))
                order.append(body_id)
            xyz, present = bodies[body_id]
            for j in range(num_joints):
                tok = lines.next()
                if len(tok) < 3:
                    raise DataError(f"{path}: short joint line at byte offset {lines.offset()}")
                xyz[t, j] = [float(v) for v in tok[:3]]
            present[t] = True
    if label is None:
        m = re.search(r"A(\d{3})", path.name)
        label = int(m.group(1)) - 1 if m else 0
    if not order:
        return SkeletonSequence(np.zeros((1, T, num_joints, 3)), label, path.stem, np.zeros((1, T), dtype=bool))
    energy = {b: motion_energy(*bodies[b]) for b in order}
    keep = sorted(order, key=lambda b: -energy[b])[:max_persons]
    coords = np.stack([bodies[b][0] for b in keep])
    valid = np.stack([bodies[b][1] for b in keep])
    return SkeletonSequence(coords, label, path.stem, valid)


def parse_shrec_gesture(path, num_joints: int = 22, label: int = 0) -> SkeletonSequence:
    """One SHREC gesture file: each non-empty line holds ``num_joints * 3`` floats."""
    path = Path(path)
    frames = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        vals = [float(v) for v in line.split()]
        if len(vals) != num_joints * 3:
            raise DataError(f"{path}:{lineno}: expected {num_joints * 3} values, got {len(vals)}")
        frames.append(np.reshape(vals, (num_joints, 3)))
    if not frames:
        raise DataError(f"{path}: empty sequence")
    return SkeletonSequence(np.stack(frames)[None], label, path.stem)
