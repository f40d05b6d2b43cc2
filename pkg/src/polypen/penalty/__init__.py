"""Polyhedral-plus-smooth penalties: values, proxes, patterns, subdifferentials."""

from .directional import (
    AbsBlock,
    DirectionalPenalty,
    FusedBlock,
    OrderedBlock,
    SortedL1Block,
    directional,
)
from .pattern import Pattern, limit_pattern, pattern, pattern_basis
from .prox import ordered_weight_prox, prox, soft_threshold, sorted_l1_prox, tv1d_prox
from .spec import PenaltySpec, value
from .subdiff import (
    subdiff_contains,
    subdiff_distance,
    subdiff_parallel_basis,
    subdiff_ri_point,
)

__all__ = [
    "PenaltySpec",
    "value",
    "prox",
    "soft_threshold",
    "sorted_l1_prox",
    "ordered_weight_prox",
    "tv1d_prox",
    "Pattern",
    "pattern",
    "limit_pattern",
    "pattern_basis",
    "subdiff_contains",
    "subdiff_distance",
    "subdiff_ri_point",
    "subdiff_parallel_basis",
    "DirectionalPenalty",
    "directional",
    "AbsBlock",
    "SortedL1Block",
    "OrderedBlock",
    "FusedBlock",
]
