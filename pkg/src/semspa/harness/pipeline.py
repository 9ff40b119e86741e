"""Dataset loading, stream derivation and model construction shared by train/eval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import (
    SkeletonDataset,
    SynthSpec,
    compute_bones,
    load_canonical,
    resample_temporal,
    synth_generate,
    voxelize,
)
from ..sem import SEMNet, SEMNetConfig
from ..sparse import SparseTensor4D
from ..spa import SPANet, SPANetConfig
from .config import ConfigError


def load_dataset(data: dict, default_seed: int = 0) -> SkeletonDataset:
    if "synth" in data:
        spec = dict(data["synth"] or {})
        spec.setdefault("seed", default_seed)
        try:
            return synth_generate(SynthSpec(**spec))
        except TypeError as exc:
            raise ConfigError(f"data.synth: {exc}") from None
    return load_canonical(data["path"])


def derive_stream(ds: SkeletonDataset, stream: str) -> SkeletonDataset:
    if stream == "joint":
        return ds
    topo = ds.topology
    return SkeletonDataset(topo.bone_topology(), [compute_bones(s, topo) for s in ds.sequences], ds.class_names, ds.max_persons)


@dataclass
class Prepared:
    """Model-ready inputs: a dense array for SEM, per-sample sparse tensors for SPA."""

    kind: str
    inputs: object
    labels: np.ndarray
    ids: list[str]

    def __len__(self) -> int:
        return len(self.labels)

    def batch(self, idx: np.ndarray):
        if self.kind == "sem":
            return self.inputs[idx]
        return SparseTensor4D.cat([self.inputs[i] for i in idx])


def prepare(ds: SkeletonDataset, kind: str, model_cfg, frames: int) -> Prepared:
    labels = ds.labels()
    ids = [s.id for s in ds.sequences]
    if kind == "sem":
        X = np.stack([resample_temporal(s, frames).joint_axis_features(ds.max_persons) for s in ds.sequences])
        return Prepared("sem", X, labels, ids)
    vcfg = model_cfg.voxel
    vox = [voxelize(resample_temporal(s, vcfg.temporal_len), vcfg, ds.topology) for s in ds.sequences]
    return Prepared("spa", vox, labels, ids)


def model_config(kind: str, params: dict, ds: SkeletonDataset):
    params = dict(params)
    try:
        if kind == "sem":
            params.setdefault("num_joints", ds.max_persons * ds.topology.num_joints)
            params.setdefault("num_classes", ds.num_classes)
            return SEMNetConfig(**params)
        params.setdefault("num_classes", ds.num_classes)
        params.setdefault("in_channels", ds.topology.num_joints)
        return SPANetConfig(**params)
    except TypeError as exc:
        raise ConfigError(f"model.{kind}: {exc}") from None


def build_model(kind: str, cfg, rng: np.random.Generator):
    return SEMNet(cfg, rng) if kind == "sem" else SPANet(cfg, rng)


def config_from_json(kind: str, d: dict):
    return SEMNetConfig.from_json(d) if kind == "sem" else SPANetConfig.from_json(d)
