"""Parametric stick-figure actions for desk-scale experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .skeleton import SkeletonDataset, SkeletonSequence, SkeletonTopology

JOINT_NAMES = ["pelvis", "neck", "head", "l_hand", "r_hand", "l_knee", "r_knee", "l_foot", "r_foot"]
EDGES = [(0, 1), (1, 2), (1, 3), (1, 4), (0, 5), (0, 6), (5, 7), (6, 8)]
PELVIS, NECK, HEAD, L_HAND, R_HAND, L_KNEE, R_KNEE, L_FOOT, R_FOOT = range(9)

# x lateral, y up, z forward (metres)
REST_POSE = np.array(
    [
        [0.0, 1.0, 0.0],
        [0.0, 1.5, 0.0],
        [0.0, 1.75, 0.0],
        [-0.3, 1.15, 0.0],
        [0.3, 1.15, 0.0],
        [-0.1, 0.5, 0.0],
        [0.1, 0.5, 0.0],
        [-0.1, 0.0, 0.0],
        [0.1, 0.0, 0.0],
    ]
)

UPPER = [PELVIS, NECK, HEAD, L_HAND, R_HAND]


def stick_figure_topology() -> SkeletonTopology:
    return SkeletonTopology(len(JOINT_NAMES), list(JOINT_NAMES), list(EDGES))


def _raise_hand(u):
    d = np.zeros_like(REST_POSE)
    d[R_HAND, 1] = 0.75 * u
    return d


def _sit_down(u):
    d = np.zeros_like(REST_POSE)
    d[UPPER, 1] = -0.45 * u
    d[[L_KNEE, R_KNEE], 1] = -0.1 * u
    d[[L_KNEE, R_KNEE], 2] = 0.35 * u
    return d


def _wave(u):
    d = np.zeros_like(REST_POSE)
    d[R_HAND, 1] = 0.6
    d[R_HAND, 0] = 0.2 * np.sin(4 * np.pi * u)
    return d


def _kick(u):
    d = np.zeros_like(REST_POSE)
    s = np.sin(np.pi * u)
    d[R_FOOT, 2] = 0.6 * s
    d[R_FOOT, 1] = 0.3 * s
    d[R_KNEE, 2] = 0.3 * s
    return d


def _stand_up(u):
    return _sit_down(1.0 - u)


def _jump(u):
    d = np.zeros_like(REST_POSE)
    d[:, 1] = 0.3 * np.sin(np.pi * u)
    return d


ACTIONS = [
    ("raise_hand", _raise_hand),
    ("sit_down", _sit_down),
    ("wave", _wave),
    ("kick", _kick),
    ("stand_up", _stand_up),
    ("jump", _jump),
]


@dataclass
class SynthSpec:
    classes: int = 3
    samples_per_class: int = 20
    noise: float = 0.02
    seed: int = 0
    frames: int = 32


def action_trajectory(label: int, frames: int) -> np.ndarray:
    """Noise-free ``(T, 9, 3)`` trajectory of class ``label``.

    Classes beyond the six templates reuse them at a faster tempo.
    """
    name, fn = ACTIONS[label % len(ACTIONS)]
    tempo = 1 + label // len(ACTIONS)
    u = np.linspace(0.0, 1.0, frames) if frames > 1 else np.zeros(1)
    u = np.minimum(u * tempo, 1.0)
    return np.stack([REST_POSE + fn(ui) for ui in u])


def class_names(classes: int) -> list[str]:
    out = []
    for c in range(classes):
        name = ACTIONS[c % len(ACTIONS)][0]
        tempo = 1 + c // len(ACTIONS)
        out.append(name if tempo == 1 else f"{name}_x{tempo}")
    return out


def synth_generate(spec: SynthSpec) -> SkeletonDataset:
    if spec.classes < 2:
        raise ValueError("synth_generate: at least 2 classes required")
    rng = np.random.default_rng(spec.seed)
    seqs = []
    for c in range(spec.classes):
        base = action_trajectory(c, spec.frames)
        for i in range(spec.samples_per_class):
            noise = rng.normal(0.0, spec.noise, size=base.shape) if spec.noise > 0 else 0.0
            seqs.append(SkeletonSequence((base + noise)[None], c, f"c{c:02d}_s{i:03d}"))
    return SkeletonDataset(stick_figure_topology(), seqs, class_names(spec.classes), 1)
