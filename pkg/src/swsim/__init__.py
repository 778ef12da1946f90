"""Sorted weight sectioning simulator for bit-sliced compute-in-memory crossbars."""

__version__ = "0.1.0"

from .energy import EnergyModel, EnergyReport, account, adc_conversion_energy, compare  # noqa: E402
from .mapper import (  # noqa: E402
    SectionConfig,
    build_matrix_mapping,
    build_vector_mapping,
    permutation_overhead,
    permute_activations,
    sort_by_magnitude,
)
from .quant import QuantizedTensor, bit_slice, dequantize, prune_magnitude, quantize  # noqa: E402
from .xbar import AdcProfile, adc_quantize, exact_reference, simulate_matmul, simulate_vector  # noqa: E402

__all__ = [
    "AdcProfile",
    "EnergyModel",
    "EnergyReport",
    "QuantizedTensor",
    "SectionConfig",
    "account",
    "adc_conversion_energy",
    "adc_quantize",
    "bit_slice",
    "build_matrix_mapping",
    "build_vector_mapping",
    "compare",
    "dequantize",
    "exact_reference",
    "permutation_overhead",
    "permute_activations",
    "prune_magnitude",
    "quantize",
    "simulate_matmul",
    "simulate_vector",
    "sort_by_magnitude",
]
