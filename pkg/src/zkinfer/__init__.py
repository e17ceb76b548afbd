"""Verifiable inference for quantized neural networks.

Pipeline: parse a JSON model graph, quantize it to fixed point, lower it to
an arithmetic constraint system over a prime field, generate a witness,
prove and verify.
"""

from .circuit import ConstraintSystem, CostConfig, compile_model, total_cost
from .field import DEFAULT_FIELD, FieldConfig, FieldElement, decode_signed, encode_signed
from .kernels import BACKEND
from .model import ModelGraph, parse_model
from .quantize import QuantConfig, dequantize, quantize, requantize_int
from .witness import Witness, check_constraints, generate_witness

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DEFAULT_FIELD",
    "ConstraintSystem",
    "CostConfig",
    "FieldConfig",
    "FieldElement",
    "ModelGraph",
    "QuantConfig",
    "Witness",
    "check_constraints",
    "compile_model",
    "decode_signed",
    "dequantize",
    "encode_signed",
    "generate_witness",
    "parse_model",
    "quantize",
    "requantize_int",
    "total_cost",
]
