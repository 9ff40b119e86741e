from .conv import (
    Rulebook,
    SparseConv,
    build_rulebook,
    clear_rulebook_cache,
    downsample_coordinates,
    sparse_conv,
    sparse_max_pool,
)
from .dense import dense_oracle_conv, dense_oracle_max_pool, gather_dense, scatter_dense
from .kernel import CoordinateIndex, KernelOffsets
from .tensor import SparseTensor4D, coalesce, is_coalesced

__all__ = [
    "CoordinateIndex",
    "KernelOffsets",
    "Rulebook",
    "SparseConv",
    "SparseTensor4D",
    "build_rulebook",
    "clear_rulebook_cache",
    "coalesce",
    "dense_oracle_conv",
    "dense_oracle_max_pool",
    "downsample_coordinates",
    "gather_dense",
    "is_coalesced",
    "scatter_dense",
    "sparse_conv",
    "sparse_max_pool",
]
