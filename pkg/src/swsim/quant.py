"""Fixed-point sign/magnitude quantization, bit slicing and magnitude pruning.

Magnitudes are integer codes ``m`` in ``[0, 2**b - 1]``; column ``j`` of a
bit-sliced row carries significance ``2**(b - 1 - j)`` (column 0 is the MSB).
All fractional scaling lives in the per-tensor ``scale``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidCode, InvalidConfig, InvalidTensor

MIN_BITS = 1
MAX_BITS = 16


@dataclass(frozen=True)
class QuantConfig:
    weight_bits: int = 8
    activation_bits: int = 8

    def __post_init__(self):
        check_bits(self.weight_bits)
        check_bits(self.activation_bits)


@dataclass(frozen=True, eq=False)
class QuantizedTensor:
    """Sign/magnitude view of a tensor: ``value = sign * magnitude * scale``."""

    signs: np.ndarray  # int8, +1 / -1
    magnitudes: np.ndarray  # int64 codes
    scale: float
    bits: int

    @property
    def shape(self) -> tuple[int, ...]:
        return self.magnitudes.shape

    @property
    def codes(self) -> np.ndarray:
        """Signed integer codes ``sign * magnitude``."""
        return self.signs.astype(np.int64) * self.magnitudes

    def __len__(self):
        return len(self.magnitudes)

    def __getitem__(self, idx) -> "QuantizedTensor":
        return QuantizedTensor(self.signs[idx], self.magnitudes[idx], self.scale, self.bits)

    @classmethod
    def from_codes(cls, codes, scale: float = 1.0, bits: int = 8) -> "QuantizedTensor":
        """Build from signed integer codes (handy for tests and hand examples)."""
        codes = np.asarray(codes, dtype=np.int64)
        check_bits(bits)
        mags = np.abs(codes)
        if mags.size and mags.max() > (1 << bits) - 1:
            raise InvalidCode(f"code magnitude {mags.max()} does not fit in {bits} bits")
        signs = np.where(codes < 0, -1, 1).astype(np.int8)
        return cls(signs, mags, float(scale), bits)


def check_bits(b: int) -> None:
    if not isinstance(b, (int, np.integer)) or not MIN_BITS <= b <= MAX_BITS:
        raise InvalidConfig(f"bit width must be an integer in [{MIN_BITS}, {MAX_BITS}], got {b!r}")


def round_half_away(x):
    """Round to nearest integer, ties away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(t, b: int) -> QuantizedTensor:
    """Symmetric per-tensor max-abs quantization to ``b`` magnitude bits.

    ``scale = max|t| / (2**b - 1)`` (1.0 for an all-zero tensor) and
    ``m = round_half_away(|t| / scale)``, so every element reconstructs to
    within ``scale / 2``.
    """
    check_bits(b)
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise InvalidTensor("tensor contains NaN or infinite values")
    levels = (1 << b) - 1
    peak = float(np.max(np.abs(t))) if t.size else 0.0
    if peak == 0.0:
        scale = 1.0
        mags = np.zeros(t.shape, dtype=np.int64)
    else:
        scale = peak / levels
        # |t| * levels / peak avoids the extra rounding of dividing by scale
        mags = round_half_away(np.abs(t) * levels / peak).astype(np.int64)
        np.minimum(mags, levels, out=mags)
    signs = np.where((t < 0) & (mags > 0), -1, 1).astype(np.int8)
    return QuantizedTensor(signs, mags, scale, b)


def dequantize(q: QuantizedTensor) -> np.ndarray:
    return q.signs * q.magnitudes * q.scale


def bit_slice(m: int, b: int) -> list[int]:
    """Binary expansion of one magnitude code, most significant bit first."""
    check_bits(b)
    if not 0 <= m < (1 << b):
        raise InvalidCode(f"magnitude {m} outside [0, {(1 << b) - 1}]")
    return [(int(m) >> (b - 1 - j)) & 1 for j in range(b)]


def bit_matrix(mags, b: int) -> np.ndarray:
    """Vectorized :func:`bit_slice`: shape ``mags.shape + (b,)``, dtype uint8."""
    mags = np.asarray(mags, dtype=np.int64)
    if mags.size and (mags.min() < 0 or mags.max() >= (1 << b)):
        raise InvalidCode(f"magnitudes outside [0, {(1 << b) - 1}]")
    shifts = np.arange(b - 1, -1, -1, dtype=np.int64)
    return ((mags[..., None] >> shifts) & 1).astype(np.uint8)


def column_significance(b: int) -> np.ndarray:
    return np.left_shift(1, np.arange(b - 1, -1, -1, dtype=np.int64))


def prune_magnitude(t, sparsity: float) -> np.ndarray:
    """Zero exactly ``floor(sparsity * N)`` smallest-magnitude elements.

    Ties are broken by flat index, lower index pruned first.
    """
    if not 0.0 <= sparsity <= 1.0:
        raise InvalidConfig(f"sparsity must be in [0, 1], got {sparsity!r}")
    t = np.array(t, dtype=np.float64)
    # guard against 0.29 * 100 == 28.999999999999996
    k = int(np.floor(sparsity * t.size + 1e-9))
    if k == 0:
        return t
    flat = t.reshape(-1)
    order = np.argsort(np.abs(flat), kind="stable")
    flat[order[:k]] = 0.0
    return flat.reshape(t.shape)
