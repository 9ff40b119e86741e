from .io import DataError, load_canonical, motion_energy, parse_ntu_skeleton, parse_shrec_gesture, save_canonical
from .skeleton import SkeletonDataset, SkeletonSequence, SkeletonTopology
from .synth import SynthSpec, action_trajectory, stick_figure_topology, synth_generate
from .transforms import compute_bones, resample_temporal
from .voxel import VoxelConfig, voxelize

__all__ = [
    "DataError",
    "SkeletonDataset",
    "SkeletonSequence",
    "SkeletonTopology",
    "SynthSpec",
    "VoxelConfig",
    "action_trajectory",
    "compute_bones",
    "load_canonical",
    "motion_energy",
    "parse_ntu_skeleton",
    "parse_shrec_gesture",
    "resample_temporal",
    "save_canonical",
    "stick_figure_topology",
    "synth_generate",
    "voxelize",
]
