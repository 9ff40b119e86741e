from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import Tensor, as_tensor, ops


def cross_entropy(logits, labels) -> Tensor:
    """Mean ``-log softmax(logits)[label]`` over a batch (or a single ``(K,)`` vector)."""
    logits = as_tensor(logits)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if logits.ndim == 1:
        logits = ops.reshape(logits, (1, logits.shape[0]))
    K = logits.shape[-1]
    if labels.shape != (logits.shape[0],):
        raise ValueError(f"cross_entropy: {logits.shape[0]} rows but {labels.shape} labels")
    if np.any(labels < 0) or np.any(labels >= K):
        raise ValueError(f"cross_entropy: label out of range [0, {K}): {labels.tolist()}")
    return ops.scale(ops.mean(ops.pick(ops.log_softmax(logits, axis=-1), labels)), -1.0)


def softmax_scores(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class Metrics:
    accuracy: float
    per_class: list  # None for classes without support
    confusion: list  # rows: true class, cols: predicted
    loss_history: list = field(default_factory=list)
    train_accuracy_history: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class": self.per_class,
            "confusion": self.confusion,
            "loss_history": self.loss_history,
            "train_accuracy_history": self.train_accuracy_history,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Metrics":
        return cls(d["accuracy"], d["per_class"], d["confusion"], d.get("loss_history", []), d.get("train_accuracy_history", []))

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "Metrics":
        return cls.from_json(json.loads(Path(path).read_text()))

    def save_confusion_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            K = len(self.confusion)
            w.writerow(["true\\pred"] + [str(k) for k in range(K)])
            for k, row in enumerate(self.confusion):
                w.writerow([str(k)] + [str(v) for v in row])


def compute_metrics(pred: np.ndarray, labels: np.ndarray, num_classes: int) -> Metrics:
    pred = np.asarray(pred, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if pred.shape != labels.shape:
        raise ValueError(f"compute_metrics: {pred.shape} predictions vs {labels.shape} labels")
    if len(labels) and (labels.max() >= num_classes or labels.min() < 0):
        raise ValueError(f"compute_metrics: labels outside [0, {num_classes})")
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(conf, (labels, pred), 1)
    support = conf.sum(axis=1)
    per_class = [float(conf[k, k] / support[k]) if support[k] else None for k in range(num_classes)]
    acc = float((pred == labels).mean()) if len(labels) else 0.0
    return Metrics(acc, per_class, conf.tolist())
