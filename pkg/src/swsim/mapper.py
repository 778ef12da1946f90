"""Crossbar section layouts for weight vectors: sorted weight sectioning and
the unsorted baselines.

A weight vector of feature size ``f`` is laid out as a sequence of sections
of ``R`` rows each. In sorted mode only nonzero weights are placed, in
ascending magnitude order, so sections made entirely of zeros are never
programmed and low-magnitude sections leave their high-order columns empty.
The unsorted baselines keep every row (zeros included) in either the original
order or a seeded shuffle. The final section is padded with all-zero rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidConfig, ShapeError
from .quant import QuantizedTensor, bit_matrix

SORTED = "sorted"
UNSORTED = "unsorted"
SHUFFLED = "shuffled"
ORDERS = (SORTED, UNSORTED, SHUFFLED)
_ORDER_ALIASES = {
    "unsorted-identity": UNSORTED,
    "identity": UNSORTED,
    "unsorted-shuffled": SHUFFLED,
    "random": SHUFFLED,
}

PAD = -1  # source index of a pad row


def normalize_order(order: str) -> str:
    order = _ORDER_ALIASES.get(order, order)
    if order not in ORDERS:
        raise InvalidConfig(f"unknown order {order!r}; expected one of {ORDERS}")
    return order


@dataclass(frozen=True)
class SectionConfig:
    rows_per_section: int = 128
    order: str = SORTED
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.rows_per_section, (int, np.integer)) or self.rows_per_section < 1:
            raise InvalidConfig(f"rows_per_section must be a positive integer, got {self.rows_per_section!r}")
        object.__setattr__(self, "order", normalize_order(self.order))


@dataclass(frozen=True, eq=False)
class BitSlicedSection:
    row_source_indices: np.ndarray  # original feature index per programmed row
    row_signs: np.ndarray  # one per row, pads included
    row_magnitudes: np.ndarray
    bit_matrix: np.ndarray  # rows x b, MSB column first
    active_mask: np.ndarray  # b booleans
    pad_rows: int = 0

    @property
    def rows(self) -> int:
        return len(self.row_signs)

    @property
    def max_magnitude(self) -> int:
        return int(self.row_magnitudes.max()) if self.rows else 0


@dataclass(eq=False)
class VectorMapping:
    """Section layout of one weight vector.

    Rows are stored section-major in ``(sections, R)`` arrays; pad rows have
    source index ``PAD``, magnitude 0 and sign +1.
    """

    feature_size: int
    bits: int
    scale: float
    order: str
    rows_per_section: int
    sources: np.ndarray  # (S, R) int64
    signs: np.ndarray  # (S, R) int8
    magnitudes: np.ndarray  # (S, R) int64

    @property
    def num_sections(self) -> int:
        return self.sources.shape[0]

    @cached_property
    def bit_tensor(self) -> np.ndarray:
        """(S, R, b) uint8 bit planes."""
        return bit_matrix(self.magnitudes, self.bits)

    @cached_property
    def active(self) -> np.ndarray:
        """(S, b) boolean active-column masks."""
        if self.num_sections == 0:
            return np.zeros((0, self.bits), dtype=bool)
        return self.bit_tensor.any(axis=1)

    @cached_property
    def permutation(self) -> np.ndarray:
        """Section-major original indices of all non-pad rows."""
        flat = self.sources.reshape(-1)
        return flat[flat != PAD]

    @property
    def pad_rows(self) -> int:
        return int(np.count_nonzero(self.sources == PAD))

    @property
    def sections(self) -> list[BitSlicedSection]:
        bits = self.bit_tensor
        out = []
        for s in range(self.num_sections):
            src = self.sources[s]
            real = src != PAD
            out.append(
                BitSlicedSection(
                    row_source_indices=src[real],
                    row_signs=self.signs[s],
                    row_magnitudes=self.magnitudes[s],
                    bit_matrix=bits[s],
                    active_mask=self.active[s],
                    pad_rows=int(np.count_nonzero(~real)),
                )
            )
        return out

    def most_significant_active(self) -> np.ndarray:
        """Per section, index of the first active column (``bits`` if none)."""
        act = self.active
        first = np.argmax(act, axis=1)
        return np.where(act.any(axis=1), first, self.bits)

    def section_max_magnitudes(self) -> np.ndarray:
        if self.num_sections == 0:
            return np.zeros(0, dtype=np.int64)
        return self.magnitudes.max(axis=1)


@dataclass(eq=False)
class MatrixMapping:
    """One :class:`VectorMapping` per output row of a weight matrix."""

    rows: list[VectorMapping]
    config: SectionConfig
    bits: int
    scale: float
    feature_size: int
    weights: QuantizedTensor | None = None

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def num_sections(self) -> int:
        return sum(v.num_sections for v in self.rows)


def sort_by_magnitude(q: QuantizedTensor) -> np.ndarray:
    """Indices of nonzero codes, ascending by (magnitude, index)."""
    mags = np.asarray(q.magnitudes)
    if mags.ndim != 1:
        raise ShapeError(f"expected a 1-D weight vector, got shape {mags.shape}")
    nz = np.flatnonzero(mags)
    return nz[np.argsort(mags[nz], kind="stable")]


def _row_order(q: QuantizedTensor, cfg: SectionConfig, stream: int) -> np.ndarray:
    f = len(q.magnitudes)
    if cfg.order == SORTED:
        return sort_by_magnitude(q)
    if cfg.order == UNSORTED:
        return np.arange(f, dtype=np.int64)
    rng = np.random.default_rng((cfg.seed, stream))
    return rng.permutation(f).astype(np.int64)


def build_vector_mapping(q: QuantizedTensor, cfg: SectionConfig, stream: int = 0) -> VectorMapping:
    """Lay out one quantized weight vector according to ``cfg``.

    ``stream`` selects an independent shuffle per output row in shuffled
    mode; it is ignored otherwise.
    """
    if q.magnitudes.ndim != 1:
        raise ShapeError(f"expected a 1-D weight vector, got shape {q.magnitudes.shape}")
    R = cfg.rows_per_section
    idx = _row_order(q, cfg, stream)
    n = len(idx)
    num_sections = math.ceil(n / R)
    pad = num_sections * R - n
    sources = np.concatenate([idx, np.full(pad, PAD, dtype=np.int64)]).reshape(num_sections, R)
    real = sources != PAD
    safe = np.where(real, sources, 0)
    mags = np.where(real, q.magnitudes[safe], 0).astype(np.int64)
    signs = np.where(real, q.signs[safe], 1).astype(np.int8)
    return VectorMapping(
        feature_size=len(q.magnitudes),
        bits=q.bits,
        scale=q.scale,
        order=cfg.order,
        rows_per_section=R,
        sources=sources,
        signs=signs,
        magnitudes=mags,
    )


def build_matrix_mapping(qw: QuantizedTensor, cfg: SectionConfig) -> MatrixMapping:
    """Map every output row of a 2-D quantized weight matrix (out x features)."""
    if qw.magnitudes.ndim == 1:
        qw = QuantizedTensor(qw.signs[None, :], qw.magnitudes[None, :], qw.scale, qw.bits)
    if qw.magnitudes.ndim != 2:
        raise ShapeError(f"expected a 2-D weight matrix, got shape {qw.magnitudes.shape}")
    rows = [build_vector_mapping(qw[r], cfg, stream=r) for r in range(qw.shape[0])]
    return MatrixMapping(
        rows=rows, config=cfg, bits=qw.bits, scale=qw.scale, feature_size=qw.shape[1], weights=qw
    )


def gather(x, mapping: VectorMapping) -> np.ndarray:
    """Gather activations into section layout: shape ``(S, R) + x.shape[1:]``.

    Pad rows receive 0.
    """
    x = np.asarray(x)
    if x.shape[:1] != (mapping.feature_size,):
        raise ShapeError(f"activation length {x.shape[:1]} does not match feature size {mapping.feature_size}")
    padded = np.concatenate([x, np.zeros((1,) + x.shape[1:], dtype=x.dtype)])
    # PAD == -1 picks the appended zero row
    return padded[mapping.sources]


def permute_activations(x, mapping: VectorMapping) -> np.ndarray:
    """Section-major gathered activations, ``out[k] = x[P[k]]`` with zero pads."""
    g = gather(x, mapping)
    return g.reshape((-1,) + g.shape[2:])


def scatter_activations(gathered, mapping: VectorMapping) -> np.ndarray:
    """Inverse of :func:`permute_activations` on the mapped positions.

    Positions that are not in the permutation come back as 0.
    """
    gathered = np.asarray(gathered)
    flat_src = mapping.sources.reshape(-1)
    if gathered.shape[:1] != flat_src.shape:
        raise ShapeError("gathered length does not match mapping rows")
    out = np.zeros((mapping.feature_size,) + gathered.shape[1:], dtype=gathered.dtype)
    real = flat_src != PAD
    out[flat_src[real]] = gathered[real]
    return out


@dataclass(frozen=True)
class PermutationOverhead:
    mux_count: int
    memory_cells: float
    time_units: float


def permutation_overhead(f: int, crossbar_count: int, c_space: float = 1, c_time: float = 1) -> PermutationOverhead:
    """Cost model of mux-based input permutation.

    One mux per feature; ``c_space * f`` buffer cells; time
    ``c_time * f * crossbar_count * ceil(log2(max(f, 2)))``.
    """
    if f < 1 or crossbar_count < 1:
        raise InvalidConfig("feature size and crossbar count must be >= 1")
    depth = (max(f, 2) - 1).bit_length()  # exact ceil(log2)
    return PermutationOverhead(
        mux_count=f,
        memory_cells=c_space * f,
        time_units=c_time * f * crossbar_count * depth,
    )
