"""Bit statistics of Gaussian weights.

For ``W ~ N(0, sigma)`` the leading bits ``a_0 .. a_{n-1}`` of ``|W|`` pin it
to a prefix interval ``[L, L + 2**-n)``; bit ``a_n`` is 0 on the lower half.
:func:`conditional_bit_zero_probability` gives the density-weighted chance of
that lower half. The section-level functions answer the same question for the
integer codes a crossbar actually stores, and the Monte Carlo sampler is an
independent check of both.

Normal probabilities use the C library ``erf``/``erfc`` through
``scipy.special`` (absolute error below 1e-15 on doubles); tail masses are
taken as ``erfc`` differences to avoid cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfc

from .errors import InvalidConfig, NumericalError
from .quant import check_bits

_SQRT2 = math.sqrt(2.0)
_TINY = 1e-300


@dataclass(frozen=True)
class GaussianWeightModel:
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise InvalidConfig(f"sigma must be positive and finite, got {self.sigma!r}")

    def pdf(self, w):
        w = np.asarray(w, dtype=np.float64)
        return np.exp(-0.5 * (w / self.sigma) ** 2) / (self.sigma * math.sqrt(2 * math.pi))

    def magnitude_mass(self, lo, hi):
        """``P(lo <= |W| < hi)`` for ``0 <= lo <= hi`` (vectorized)."""
        lo = np.asarray(lo, dtype=np.float64) / (self.sigma * _SQRT2)
        hi = np.asarray(hi, dtype=np.float64) / (self.sigma * _SQRT2)
        body = erf(hi) - erf(lo)
        tail = erfc(lo) - erfc(hi)
        return np.where(lo > 0.5, tail, body)


@dataclass(frozen=True)
class MagnitudeInterval:
    """Magnitude band ``[lo, hi)``; one half of a symmetric weight region."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0 <= self.lo < self.hi):
            raise InvalidConfig(f"need 0 <= lo < hi, got [{self.lo}, {self.hi})")


@dataclass(frozen=True)
class BitPrefixInterval:
    """``[L, U)`` fixed by the first ``n`` bits of ``|w|``; ``M`` splits it on bit ``n``."""

    L: float
    n: int

    def __post_init__(self):
        if self.L < 0 or self.n < 0:
            raise InvalidConfig(f"need L >= 0 and n >= 0, got L={self.L}, n={self.n}")

    @property
    def width(self) -> float:
        return 2.0 ** (-self.n)

    @property
    def U(self) -> float:
        return self.L + self.width

    @property
    def M(self) -> float:
        return self.L + self.width / 2

    @classmethod
    def from_bits(cls, bits) -> "BitPrefixInterval":
        """Interval selected by leading bits ``a_0 a_1 ...`` with weights ``2**-i``."""
        L = sum(int(a) * 2.0 ** (-i) for i, a in enumerate(bits))
        return cls(L, len(bits))


def conditional_bit_zero_probability(model: GaussianWeightModel, L: float, n: int) -> float:
    """``P(a_n = 0 | |W| in [L, L + 2**-n))`` = mass of the lower half over the whole."""
    iv = BitPrefixInterval(L, n)
    den = float(model.magnitude_mass(iv.L, iv.U))
    if not den > _TINY:
        raise NumericalError(f"prefix interval [{iv.L}, {iv.U}) has no probability mass at sigma={model.sigma}")
    return float(model.magnitude_mass(iv.L, iv.M)) / den


def prefix_probability_scan(model: GaussianWeightModel, Ls, n: int) -> list[tuple[float, float]]:
    """``(L, P(a_n = 0))`` pairs, for inspecting how the probability moves with L."""
    return [(float(L), conditional_bit_zero_probability(model, L, n)) for L in Ls]


def is_non_increasing(values) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def _code_cells(b: int, scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Rounding cells of every code: ``[(m - 1/2) s, (m + 1/2) s)`` clipped to ``[0, (2**b - 1) s]``."""
    m = np.arange(1 << b, dtype=np.float64)
    top = ((1 << b) - 1) * scale
    lo = np.clip((m - 0.5) * scale, 0.0, top)
    hi = np.clip((m + 0.5) * scale, 0.0, top)
    return lo, hi


def section_bit_zero_probability(
    model: GaussianWeightModel, interval: MagnitudeInterval, p: int, b: int, scale: float
) -> float:
    """Chance that column ``p`` (significance ``2**(b-1-p)``) of a quantized
    weight drawn from ``interval`` is 0.

    Sums the Gaussian mass of every code cell (intersected with the interval)
    whose bit ``p`` is clear. Magnitudes above ``(2**b - 1) * scale`` are
    outside the quantizer's range and ignored.
    """
    check_bits(b)
    if not 0 <= p < b:
        raise InvalidConfig(f"column {p} outside [0, {b})")
    if not scale > 0:
        raise InvalidConfig("scale must be positive")
    lo, hi = _code_cells(b, scale)
    lo = np.maximum(lo, interval.lo)
    hi = np.minimum(hi, interval.hi)
    mass = np.where(hi > lo, model.magnitude_mass(lo, np.maximum(hi, lo)), 0.0)
    total = float(mass.sum())
    if not total > _TINY:
        raise NumericalError(f"interval [{interval.lo}, {interval.hi}) carries no mass inside the code range")
    codes = np.arange(1 << b)
    zero = ((codes >> (b - 1 - p)) & 1) == 0
    return float(mass[zero].sum()) / total


def expected_active_probability(
    model: GaussianWeightModel, interval: MagnitudeInterval, R: int, p: int, b: int, scale: float
) -> float:
    """Chance that column ``p`` is active in a section of ``R`` i.i.d. rows."""
    if R < 1:
        raise InvalidConfig("R must be >= 1")
    q = section_bit_zero_probability(model, interval, p, b, scale)
    return 1.0 - q**R


def section_column_stats(model: GaussianWeightModel, interval: MagnitudeInterval, R: int, b: int, scale: float) -> dict:
    """Per-column zero and activity probabilities plus the expected active-column count."""
    q = np.array([section_bit_zero_probability(model, interval, p, b, scale) for p in range(b)])
    active = 1.0 - q**R
    return {"zero": q, "active": active, "expected_active_columns": float(active.sum())}


@dataclass(frozen=True)
class MonteCarloEstimate:
    probability: float
    stderr: float
    accepted: int
    drawn: int


def _sample_magnitudes(model, lo, hi, samples, rng, max_draws):
    """Rejection-sample ``|W|`` restricted to ``[lo, hi)``.

    A finite band uses a uniform proposal with acceptance ``f(w) / f(lo)``
    (the density is decreasing on ``w >= 0``); an unbounded band proposes
    ``|N(0, sigma)|`` and rejects draws below ``lo``.
    """
    kept = []
    accepted = drawn = 0
    chunk = max(1024, samples)
    while accepted < samples and drawn < max_draws:
        n = int(min(chunk, max_draws - drawn))
        if math.isfinite(hi):
            w = rng.uniform(lo, hi, n)
            keep = rng.random(n) < np.exp(-(w * w - lo * lo) / (2 * model.sigma**2))
        else:
            w = np.abs(rng.normal(0.0, model.sigma, n))
            keep = w >= lo
        w = w[keep]
        drawn += n
        kept.append(w)
        accepted += len(w)
        rate = max(accepted / drawn, 1e-6)
        chunk = int(min(max(1024, 1.2 * (samples - accepted) / rate), 1 << 24))
    if accepted == 0:
        raise NumericalError(f"no samples accepted in [{lo}, {hi}) after {drawn} draws")
    return np.concatenate(kept)[:samples], drawn


def monte_carlo_bit_stats(
    model: GaussianWeightModel,
    region,
    position: int,
    samples: int = 1_000_000,
    seed: int = 0,
    bits: int | None = None,
    scale: float | None = None,
    max_draws: int | None = None,
) -> MonteCarloEstimate:
    """Empirical bit-zero frequency for Gaussian magnitudes inside ``region``.

    With a :class:`BitPrefixInterval`, ``position`` must equal its ``n`` and
    the estimate targets :func:`conditional_bit_zero_probability`. With a
    :class:`MagnitudeInterval`, samples are quantized with ``scale`` to
    ``bits``-bit codes and ``position`` is the column whose zero rate is
    measured (compare :func:`section_bit_zero_probability`).
    """
    if samples < 1:
        raise InvalidConfig("samples must be >= 1")
    rng = np.random.default_rng(seed)
    max_draws = max_draws or 1000 * samples
    if isinstance(region, BitPrefixInterval):
        if position != region.n:
            raise InvalidConfig(f"prefix of length {region.n} splits on bit {region.n}, not {position}")
        w, drawn = _sample_magnitudes(model, region.L, region.U, samples, rng, max_draws)
        zero = w < region.M
    elif isinstance(region, MagnitudeInterval):
        if bits is None or scale is None:
            raise InvalidConfig("section queries need bits and scale")
        check_bits(bits)
        if not 0 <= position < bits:
            raise InvalidConfig(f"column {position} outside [0, {bits})")
        top = ((1 << bits) - 1) * scale
        hi = min(region.hi, top)
        if not region.lo < hi:
            raise NumericalError("interval lies outside the code range")
        w, drawn = _sample_magnitudes(model, region.lo, hi, samples, rng, max_draws)
        codes = np.minimum(np.floor(w / scale + 0.5), (1 << bits) - 1).astype(np.int64)
        zero = ((codes >> (bits - 1 - position)) & 1) == 0
    else:
        raise InvalidConfig(f"unsupported region {region!r}")
    p = float(zero.mean())
    n = len(zero)
    return MonteCarloEstimate(p, math.sqrt(max(p * (1 - p), 1e-12) / n), n, drawn)
