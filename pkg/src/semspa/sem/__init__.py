from .attention import (
    GRCFSAParams,
    attention_cross_frame,
    attention_cross_frame_weights,
    attention_single_frame,
    attention_unified,
    gr_cfsa_attention_matrix,
    gr_cfsa_forward,
)
from .export import attention_matrix, top_pairs, write_attention_csv
from .flops import estimate_flops, flops_breakdown, leading_ratio_slope
from .mstff import MSTFF, MSTFFConfig, ms_tff_forward
from .net import SEMBlock, SEMBlockConfig, SEMNet, SEMNetConfig, tiny_sem_config

__all__ = [
    "GRCFSAParams",
    "MSTFF",
    "MSTFFConfig",
    "SEMBlock",
    "SEMBlockConfig",
    "SEMNet",
    "SEMNetConfig",
    "attention_cross_frame",
    "attention_cross_frame_weights",
    "attention_matrix",
    "attention_single_frame",
    "attention_unified",
    "estimate_flops",
    "flops_breakdown",
    "gr_cfsa_attention_matrix",
    "gr_cfsa_forward",
    "leading_ratio_slope",
    "ms_tff_forward",
    "tiny_sem_config",
    "top_pairs",
    "write_attention_csv",
]
