"""Multiply-accumulate counts of the attention layers as implemented.

Softmax, scaling and bias additions are not counted. Frame sums in the
cross-frame path count ``T*N*C_e``, and the regularized path adds one
multiply (``beta``) and one add (``alpha_hat``) per joint pair.
"""

from __future__ import annotations

VARIANTS = ("unified", "single_frame", "cross_frame", "gr_cfsa")


def flops_breakdown(variant: str, N: int, T: int, C_in: int, C_e: int) -> dict[str, int]:
    if variant not in VARIANTS:
        raise ValueError(f"estimate_flops: unknown variant {variant!r}; choose from {VARIANTS}")
    for name, v in (("N", N), ("T", T), ("C_in", C_in), ("C_e", C_e)):
        if v < 1:
            raise ValueError(f"estimate_flops: {name} must be positive, got {v}")
    embeddings = 2 * T * N * C_in * C_e
    if variant == "unified":
        weights = T * T * N * N * C_e
        aggregation = T * T * N * N * C_in
    elif variant == "single_frame":
        weights = T * N * N * C_e
        aggregation = T * N * N * C_in
    else:
        weights = T * N * C_e + N * N * C_e
        if variant == "gr_cfsa":
            weights += 2 * N * N
        aggregation = T * N * N * C_in
    return {"embeddings": embeddings, "weights": weights, "aggregation": aggregation}


def estimate_flops(variant: str, N: int, T: int, C_in: int, C_e: int, L: int = 1, heads: int = 1) -> int:
    """Total MACs of ``L`` layers of ``heads`` attention heads."""
    if L < 1 or heads < 1:
        raise ValueError(f"estimate_flops: L and heads must be positive, got {L}, {heads}")
    return L * heads * sum(flops_breakdown(variant, N, T, C_in, C_e).values())


def leading_ratio_slope(N: int, C_in: int, C_e: int) -> float:
    """Predicted d(unified/cross_frame)/dT from the T-proportional terms only.

    unified ~ T^2 N^2 (C_e + C_in); cross_frame ~ T (N^2 C_in + 2 N C_in C_e + N C_e).
    """
    return N * N * (C_e + C_in) / (N * N * C_in + 2 * N * C_in * C_e + N * C_e)
