"""Experiment configuration: one JSON file per run.

Schema::

    {
      "seed": 0,                              # mandatory
      "data": {"synth": {"classes": 3, "samples_per_class": 20, "noise": 0.02,
                         "seed": 0, "frames": 32}}
              | {"path": "dir/with/dataset.json"},
      "stream": "joint" | "bone",             # default "joint"
      "model": {"sem": {...SEMNetConfig fields...}}
             | {"spa": {...SPANetConfig fields...}}
             | {"fusion": {"checkpoints": ["a.ckpt", "b.ckpt"]}},
      "frames": 32,                           # SEM resample length (default 32)
      "optimizer": {"lr": 0.01, "momentum": 0.9, "weight_decay": 1e-4,
                    "epochs": 300, "batch_size": 16,
                    "stop_at_train_acc": null, "clip_norm": null},
      "output_dir": "runs/x"
    }

``num_joints``/``num_classes``/``in_channels`` are derived from the data and
may be omitted from the model sections. Relative paths resolve against the
config file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

MODEL_KINDS = ("sem", "spa", "fusion")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class OptimizerConfig:
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    epochs: int = 300
    batch_size: int = 16
    stop_at_train_acc: float | None = None
    clip_norm: float | None = None

    def __post_init__(self):
        if self.lr < 0 or self.weight_decay < 0 or not 0 <= self.momentum < 1:
            raise ConfigError(f"optimizer: invalid lr/momentum/weight_decay {self.lr}/{self.momentum}/{self.weight_decay}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError(f"optimizer: epochs must be >= 0 and batch_size >= 1, got {self.epochs}, {self.batch_size}")


@dataclass
class ExperimentConfig:
    seed: int
    data: dict
    model: dict
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    stream: str = "joint"
    frames: int = 32
    output_dir: str = "runs/default"

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        if not isinstance(self.data, dict) or len(set(self.data) & {"synth", "path"}) != 1:
            raise ConfigError("data: exactly one of 'synth' or 'path' required")
        if not isinstance(self.model, dict) or len(self.model) != 1 or next(iter(self.model)) not in MODEL_KINDS:
            raise ConfigError(f"model: exactly one section out of {MODEL_KINDS} required, got {list(self.model)}")
        if self.stream not in ("joint", "bone"):
            raise ConfigError(f"stream must be 'joint' or 'bone', got {self.stream!r}")
        if self.model_kind == "spa" and self.stream == "bone":
            raise ConfigError("the bone stream is supported for SEM models only")
        if self.frames < 1:
            raise ConfigError(f"frames must be positive, got {self.frames}")

    @property
    def model_kind(self) -> str:
        return next(iter(self.model))

    @property
    def model_params(self) -> dict:
        return dict(self.model[self.model_kind] or {})

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "data": self.data,
            "model": self.model,
            "optimizer": dict(self.optimizer.__dict__),
            "stream": self.stream,
            "frames": self.frames,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_json(cls, d: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        if "seed" not in d:
            raise ConfigError("config: 'seed' is mandatory")
        known = {"seed", "data", "model", "optimizer", "stream", "frames", "output_dir"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"config: unknown keys {sorted(extra)}")
        try:
            opt = OptimizerConfig(**d.get("optimizer", {}))
        except TypeError as exc:
            raise ConfigError(f"optimizer: {exc}") from None
        data = dict(d.get("data") or {})
        out = d.get("output_dir", "runs/default")
        if base_dir is not None:
            if "path" in data:
                data["path"] = str((base_dir / data["path"]).resolve())
            out = str((base_dir / out).resolve())
        model = dict(d.get("model") or {})
        if base_dir is not None and "fusion" in model:
            fus = dict(model["fusion"])
            fus["checkpoints"] = [str((base_dir / p).resolve()) for p in fus.get("checkpoints", [])]
            model["fusion"] = fus
        return cls(d["seed"], data, model, opt, d.get("stream", "joint"), int(d.get("frames", 32)), out)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return ExperimentConfig.from_json(raw, path.parent)
