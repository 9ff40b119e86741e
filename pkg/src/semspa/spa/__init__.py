from .blocks import SPA3p1DBlock, SPA4DBlock, SPABlockConfig, main_path_parameter_count, make_block
from .export import activation_records, dump_activations, write_activation_csv
from .net import SPANet, SPANetConfig, tiny_spa_config

__all__ = [
    "SPA3p1DBlock",
    "SPA4DBlock",
    "SPABlockConfig",
    "SPANet",
    "SPANetConfig",
    "activation_records",
    "dump_activations",
    "main_path_parameter_count",
    "make_block",
    "tiny_spa_config",
    "write_activation_csv",
]
