"""Constraint systems, gadgets and model lowering."""

from .gadgets import (
    assert_bits_and_reconstruct,
    assert_max,
    fused_requant_relu,
    max_of,
    range_check_signed,
    range_check_unsigned,
    relu,
    requantize,
    unconstrained_to_bits,
)
from .lower import compile_model, fusion_plan, lower
from .system import (
    CircuitBuilder,
    CircuitCounts,
    ConstraintSystem,
    CostConfig,
    deserialize_circuit,
    serialize_circuit,
    total_cost,
    unbound_hints,
)

__all__ = [
    "CircuitBuilder",
    "CircuitCounts",
    "ConstraintSystem",
    "CostConfig",
    "assert_bits_and_reconstruct",
    "assert_max",
    "compile_model",
    "deserialize_circuit",
    "fused_requant_relu",
    "fusion_plan",
    "lower",
    "max_of",
    "range_check_signed",
    "range_check_unsigned",
    "relu",
    "requantize",
    "serialize_circuit",
    "total_cost",
    "unbound_hints",
    "unconstrained_to_bits",
]
