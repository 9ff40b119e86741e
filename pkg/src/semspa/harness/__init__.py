from .config import ConfigError, ExperimentConfig, OptimizerConfig, load_config
from .fusion import fuse_score_maps, fuse_scores
from .metrics import Metrics, compute_metrics, cross_entropy, softmax_scores
from .train import SGD, TrainingDiverged, evaluate, load_model, seed_streams, train

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "Metrics",
    "OptimizerConfig",
    "SGD",
    "TrainingDiverged",
    "compute_metrics",
    "cross_entropy",
    "evaluate",
    "fuse_score_maps",
    "fuse_scores",
    "load_config",
    "load_model",
    "seed_streams",
    "softmax_scores",
    "train",
]
