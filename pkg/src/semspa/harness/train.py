"""Minibatch SGD with momentum, checkpointing and evaluation.

Randomness: ``SeedSequence(seed).spawn(3)`` yields independent streams for
(0) minibatch order, (1) parameter init and (2) synthetic-data noise when the
data section does not pin its own seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autodiff import NumericalError, load_checkpoint, no_grad, save_checkpoint
from ..data import SkeletonDataset
from .config import ExperimentConfig, OptimizerConfig
from .metrics import Metrics, compute_metrics, cross_entropy, softmax_scores
from .pipeline import Prepared, build_model, config_from_json, derive_stream, load_dataset, model_config, prepare

CHECKPOINT = "checkpoint.ckpt"
LAST_GOOD = "last_good.ckpt"


class TrainingDiverged(NumericalError):
    """Loss became non-finite; the last good checkpoint was written."""


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, int]:
    order, init, noise = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(order), np.random.default_rng(init), int(noise.generate_state(1)[0])


class SGD:
    """``v <- mu v + (g + wd p)``; ``p <- p - lr v``."""

    def __init__(self, params, opt: OptimizerConfig):
        self.params = list(params)
        self.opt = opt
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        o = self.opt
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        if o.clip_norm is not None:
            norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
            if norm > o.clip_norm:
                grads = [g * (o.clip_norm / norm) for g in grads]
        for p, v, g in zip(self.params, self.velocity, grads):
            v *= o.momentum
            v += g + o.weight_decay * p.data
            p.data -= o.lr * v


def predict_logits(model, data: Prepared, batch_size: int = 64) -> np.ndarray:
    model.eval()
    out = []
    with no_grad():
        for s in range(0, len(data), batch_size):
            idx = np.arange(s, min(s + batch_size, len(data)))
            logits = model(data.batch(idx)).data
            out.append(logits.reshape(len(idx), -1))
    model.train()
    return np.concatenate(out) if out else np.zeros((0, 0))


@dataclass
class TrainResult:
    model: object
    metrics: Metrics
    checkpoint: Path
    epochs_run: int


def _meta(cfg: ExperimentConfig, kind: str, mcfg, ds: SkeletonDataset, epochs_run: int) -> dict:
    exp = cfg.to_json()
    exp.pop("output_dir")  # keeps checkpoint bytes independent of where they are written
    return {
        "experiment": exp,
        "model_kind": kind,
        "model_config": mcfg.to_json(),
        "stream": cfg.stream,
        "frames": cfg.frames,
        "class_names": list(ds.class_names),
        "epochs_run": epochs_run,
    }


def train(cfg: ExperimentConfig, log=None) -> TrainResult:
    if cfg.model_kind == "fusion":
        raise ValueError("train: fusion configs have nothing to train; use 'fuse'")
    order_rng, init_rng, noise_seed = seed_streams(cfg.seed)
    ds = derive_stream(load_dataset(cfg.data, noise_seed), cfg.stream)
    if ds.num_classes < 2 or len(ds) == 0:
        raise ValueError("train: dataset needs at least two classes and one sample")
    kind = cfg.model_kind
    mcfg = model_config(kind, cfg.model_params, ds)
    data = prepare(ds, kind, mcfg, cfg.frames)
    model = build_model(kind, mcfg, init_rng)
    opt = SGD(model.parameters(), cfg.optimizer)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    losses, accs = [], []
    last_good = model.state_dict()
    epochs_run = 0
    bs = cfg.optimizer.batch_size
    for epoch in range(cfg.optimizer.epochs):
        perm = order_rng.permutation(len(data))
        total, seen = 0.0, 0
        try:
            for s in range(0, len(data), bs):
                idx = perm[s : s + bs]
                model.zero_grad()
                loss = cross_entropy(model(data.batch(idx)), data.labels[idx])
                if not np.isfinite(loss.item()):
                    raise NumericalError("loss is not finite")
                loss.backward()
                opt.step()
                total += loss.item() * len(idx)
                seen += len(idx)
            train_acc = float((predict_logits(model, data).argmax(axis=1) == data.labels).mean())
        except NumericalError as exc:
            model.load_state_dict(last_good)
            path = out_dir / LAST_GOOD
            save_checkpoint(path, last_good, _meta(cfg, kind, mcfg, ds, epochs_run))
            raise TrainingDiverged(f"training diverged at epoch {epoch} ({exc}); last good checkpoint: {path}") from None
        last_good = model.state_dict()
        epochs_run = epoch + 1
        losses.append(total / seen)
        accs.append(train_acc)
        if log is not None:
            log(f"epoch {epoch:4d} loss {losses[-1]:.6f} train_acc {train_acc:.4f}")
        target = cfg.optimizer.stop_at_train_acc
        if target is not None and train_acc >= target:
            break

    logits = predict_logits(model, data)
    metrics = compute_metrics(logits.argmax(axis=1), data.labels, ds.num_classes)
    metrics.loss_history = losses
    metrics.train_accuracy_history = accs
    ckpt = out_dir / CHECKPOINT
    save_checkpoint(ckpt, model.state_dict(), _meta(cfg, kind, mcfg, ds, epochs_run))
    metrics.save(out_dir / "metrics.json")
    metrics.save_confusion_csv(out_dir / "confusion.csv")
    return TrainResult(model, metrics, ckpt, epochs_run)


def load_model(path):
    state, meta = load_checkpoint(path)
    kind = meta["model_kind"]
    mcfg = config_from_json(kind, meta["model_config"])
    model = build_model(kind, mcfg, np.random.default_rng(0))
    model.load_state_dict(state)
    model.eval()
    return model, meta, mcfg


def training_dataset(meta: dict) -> SkeletonDataset:
    exp = meta["experiment"]
    _, _, noise_seed = seed_streams(exp["seed"])
    return derive_stream(load_dataset(exp["data"], noise_seed), meta["stream"])


def evaluate(checkpoint, ds: SkeletonDataset | None = None) -> tuple[Metrics, dict, dict]:
    """Metrics, ``{id: probs}`` scores and ``{id: label}`` for a checkpoint on a split.

    ``ds`` defaults to the checkpoint's own training data. Pure in its inputs.
    """
    model, meta, mcfg = load_model(checkpoint)
    if ds is None:
        ds = training_dataset(meta)
    elif meta["stream"] == "bone" and ds.topology.edges:
        ds = derive_stream(ds, "bone")
    K = mcfg.num_classes
    if ds.num_classes != K:
        raise ValueError(f"evaluate: dataset has {ds.num_classes} classes, checkpoint expects {K}")
    data = prepare(ds, meta["model_kind"], mcfg, meta["frames"])
    logits = predict_logits(model, data)
    probs = softmax_scores(logits)
    metrics = compute_metrics(probs.argmax(axis=1), data.labels, K)
    scores = {sid: p.tolist() for sid, p in zip(data.ids, probs)}
    labels = {sid: int(y) for sid, y in zip(data.ids, data.labels)}
    return metrics, scores, labels


def write_eval(out_dir, metrics: Metrics, scores: dict, labels: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics.save(out / "metrics.json")
    metrics.save_confusion_csv(out / "confusion.csv")
    (out / "scores.json").write_text(json.dumps(scores))
    (out / "labels.json").write_text(json.dumps(labels))
