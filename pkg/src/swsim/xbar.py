"""Functional simulation of sectioned bit-sliced crossbar dot products.

Each section produces one signed analog sum per column. Active columns are
digitized by a bipolar mid-tread ADC with full scale ``FS = R * (2**bx - 1)``,
shifted by the column significance and accumulated across sections. All
arithmetic is exact: column sums are integers and a quantized column value is
``code * FS / K`` with ``K = 2**(r-1) - 1``, carried as a rational.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidConfig, ShapeError
from .mapper import BitSlicedSection, MatrixMapping, VectorMapping, gather
from .quant import QuantizedTensor, column_significance

# column handling modes
DROPPED, IDENTITY, QUANTIZED = 0, 1, 2


def full_scale(rows_per_section: int, activation_bits: int) -> int:
    """Largest attainable |column sum| for one section."""
    return rows_per_section * ((1 << activation_bits) - 1)


def lossless_resolution(fs: int) -> int:
    """Smallest resolution whose positive code range covers ``fs``."""
    return int(fs).bit_length() + 1


@dataclass(frozen=True)
class AdcProfile:
    """Per-column ADC resolutions (column 0 = MSB) and the shared full scale."""

    resolutions: tuple[int, ...]
    full_scale: int

    def __post_init__(self):
        res = tuple(int(r) for r in self.resolutions)
        if any(r < 0 for r in res):
            raise InvalidConfig(f"ADC resolutions must be >= 0, got {res}")
        if int(self.full_scale) < 1:
            raise InvalidConfig(f"full scale must be >= 1, got {self.full_scale}")
        object.__setattr__(self, "resolutions", res)
        object.__setattr__(self, "full_scale", int(self.full_scale))

    @classmethod
    def fixed(cls, r: int, bits: int, fs: int) -> "AdcProfile":
        return cls((r,) * bits, fs)

    @classmethod
    def lossless(cls, bits: int, fs: int) -> "AdcProfile":
        return cls.fixed(lossless_resolution(fs), bits, fs)

    def __len__(self):
        return len(self.resolutions)

    @property
    def is_lossless(self) -> bool:
        return all(r >= 2 and (1 << (r - 1)) - 1 >= self.full_scale for r in self.resolutions)

    def column_modes(self) -> list[tuple[int, int]]:
        """``(mode, K)`` per column."""
        out = []
        for r in self.resolutions:
            if r <= 1:
                out.append((DROPPED, 0))
                continue
            k = (1 << (r - 1)) - 1
            out.append((IDENTITY, 1) if k >= self.full_scale else (QUANTIZED, k))
        return out

    def step(self, j: int) -> Fraction:
        """Quantization step of column ``j`` (0 when dropped, 1 when lossless)."""
        mode, k = self.column_modes()[j]
        if mode == DROPPED:
            return Fraction(0)
        if mode == IDENTITY:
            return Fraction(1)
        return Fraction(self.full_scale, k)


def _div_round_half_away(num, den: int):
    """round_half_away(num / den) for integer num (scalar or array) and den > 0."""
    mag = (2 * np.abs(num) + den) // (2 * den)
    return np.sign(num) * mag


def adc_quantize(value: int, r: int, fs: int) -> Fraction | int:
    """Digitize one signed column sum.

    ``r == 0`` models a pruned ADC and ``r == 1`` a single-level converter;
    both return 0. When ``2**(r-1) - 1 >= fs`` the conversion is lossless.
    Otherwise the step is ``fs / (2**(r-1) - 1)`` with round-half-away and a
    symmetric clamp.
    """
    if r <= 1:
        return 0
    k = (1 << (r - 1)) - 1
    value = int(value)
    if k >= fs:
        return value
    code = int(_div_round_half_away(value * k, fs))
    code = max(-k, min(k, code))
    return Fraction(code * fs, k)


def section_column_sums(section: BitSlicedSection, gathered_x) -> np.ndarray:
    """Signed per-column sums ``sum_rows sign * bit * x`` of one section."""
    x = np.asarray(gathered_x, dtype=np.int64)
    if x.shape[:1] != (section.rows,):
        raise ShapeError(f"{x.shape[:1]} activations for a section of {section.rows} rows")
    weighted = section.bit_matrix.astype(np.int64) * section.row_signs.astype(np.int64)[:, None]
    return weighted.T @ x


def simulate_section(section: BitSlicedSection, gathered_x, profile: AdcProfile) -> Fraction | int:
    """Shift-add of the digitized active columns of one section."""
    if len(profile) != section.bit_matrix.shape[1]:
        raise ShapeError("profile length does not match section width")
    sums = section_column_sums(section, gathered_x)
    b = len(profile)
    total = 0
    for j in range(b):
        if section.active_mask[j]:
            total += (1 << (b - 1 - j)) * adc_quantize(sums[j], profile.resolutions[j], profile.full_scale)
    return total


@dataclass(eq=False)
class ConversionLog:
    """Which (section, column) pairs converted, for ``inferences`` input vectors."""

    active: np.ndarray  # (S, b) bool
    resolutions: tuple[int, ...]
    inferences: int = 1

    @property
    def performed(self) -> np.ndarray:
        return self.active & (np.asarray(self.resolutions) > 0)[None, :]

    @property
    def num_sections(self) -> int:
        return self.active.shape[0]

    @property
    def conversions(self) -> int:
        return int(self.performed.sum()) * self.inferences

    def records(self):
        """Yield ``(section, column, active, resolution, performed)`` rows."""
        perf = self.performed
        for s in range(self.active.shape[0]):
            for j, r in enumerate(self.resolutions):
                yield s, j, bool(self.active[s, j]), r, bool(perf[s, j])


def _signed_codes(x) -> tuple[np.ndarray, float]:
    if isinstance(x, QuantizedTensor):
        return x.codes, x.scale
    return np.asarray(x, dtype=np.int64), 1.0


def _column_totals(mapping: VectorMapping, x: np.ndarray, profile: AdcProfile) -> np.ndarray:
    """Per-column digitized code totals summed over sections: shape (b, B)."""
    b = mapping.bits
    g = gather(x, mapping).astype(np.int64)  # (S, R, B)
    weighted = mapping.bit_tensor.astype(np.int64) * mapping.signs.astype(np.int64)[..., None]
    sums = np.einsum("srj,srk->sjk", weighted, g)  # (S, b, B)
    totals = np.zeros((b, x.shape[1]), dtype=object)
    for j, (mode, k) in enumerate(profile.column_modes()):
        if mode == DROPPED or sums.shape[0] == 0:
            continue
        col = sums[:, j, :]
        if mode == QUANTIZED:
            col = np.clip(_div_round_half_away(col * k, profile.full_scale), -k, k)
        totals[j] = [int(v) for v in col.sum(axis=0)]
    return totals


def _combine(totals: np.ndarray, profile: AdcProfile) -> list:
    """Exact shift-add of per-column code totals into accumulator values."""
    b = len(profile)
    modes = profile.column_modes()
    sig = column_significance(b)
    denom = 1
    for mode, k in modes:
        if mode == QUANTIZED:
            denom = denom * k // math.gcd(denom, k)
    weights = []
    for j, (mode, k) in enumerate(modes):
        if mode == DROPPED:
            weights.append(0)
        elif mode == IDENTITY:
            weights.append(int(sig[j]) * denom)
        else:
            weights.append(int(sig[j]) * profile.full_scale * (denom // k))
    out = []
    for col in range(totals.shape[1]):
        num = sum(w * int(totals[j, col]) for j, w in enumerate(weights) if w)
        out.append(num if denom == 1 else Fraction(num, denom))
    return out


def simulate_vector(mapping: VectorMapping, x, profile: AdcProfile):
    """Run all sections of one weight vector against activation codes ``x``.

    ``x`` holds signed activation codes of shape ``(f,)`` or ``(f, B)`` (or a
    :class:`QuantizedTensor`). Returns ``(accumulator, log)``; the accumulator
    is a scalar for 1-D input and a list of ``B`` values otherwise.
    """
    if len(profile) != mapping.bits:
        raise ShapeError(f"profile has {len(profile)} columns, mapping has {mapping.bits}")
    codes, _ = _signed_codes(x)
    single = codes.ndim == 1
    x2 = codes[:, None] if single else codes
    acc = _combine(_column_totals(mapping, x2, profile), profile)
    log = ConversionLog(mapping.active, profile.resolutions, inferences=x2.shape[1])
    return (acc[0] if single else acc), log


def exact_reference(qw, qx) -> np.ndarray:
    """Exact integer product of signed weight codes and activation codes."""
    w, _ = _signed_codes(qw)
    x, _ = _signed_codes(qx)
    if w.ndim == 1:
        w = w[None, :]
    if w.shape[1] != x.shape[0]:
        raise ShapeError(f"cannot multiply {w.shape} by {x.shape}")
    # object dtype keeps the products exact for any bit width
    return w.astype(object) @ x.astype(object)


@dataclass(eq=False)
class SimResult:
    outputs: np.ndarray  # object array of exact accumulator values (rows x B)
    dequantized: np.ndarray  # float, outputs * s_w * s_x
    reference: np.ndarray  # exact integer oracle
    max_abs: float
    rmse: float
    logs: list[ConversionLog]

    @property
    def exact(self) -> bool:
        return self.max_abs == 0.0

    @property
    def conversions(self) -> int:
        return sum(log.conversions for log in self.logs)


def simulate_matmul(mm: MatrixMapping, qx, profile: AdcProfile, workers: int = 1) -> SimResult:
    """Simulate ``W @ X`` row by row and compare with the exact oracle.

    ``qx`` has shape ``(f,)`` or ``(f, B)``. With ``workers > 1`` rows are
    simulated on a thread pool; results are identical to sequential runs.
    """
    codes, sx = _signed_codes(qx)
    x2 = codes[:, None] if codes.ndim == 1 else codes
    if x2.shape[0] != mm.feature_size:
        raise ShapeError(f"activation features {x2.shape[0]} != weight features {mm.feature_size}")

    def run(vm):
        return simulate_vector(vm, x2, profile)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, mm.rows))
    else:
        results = [run(vm) for vm in mm.rows]

    outputs = np.empty((len(mm.rows), x2.shape[1]), dtype=object)
    for r, (acc, _) in enumerate(results):
        outputs[r, :] = acc
    logs = [log for _, log in results]

    if mm.weights is not None:
        reference = exact_reference(mm.weights, x2)
    else:
        reference = np.zeros_like(outputs)
    diff = outputs - reference
    abs_diff = [abs(Fraction(v)) for v in diff.ravel()]
    max_abs = float(max(abs_diff)) if abs_diff else 0.0
    rmse = math.sqrt(sum(float(d) ** 2 for d in abs_diff) / len(abs_diff)) if abs_diff else 0.0
    dequantized = np.array([[float(v) for v in row] for row in outputs], dtype=np.float64).reshape(outputs.shape)
    dequantized *= mm.scale * sx
    return SimResult(outputs, dequantized, reference, max_abs, rmse, logs)
