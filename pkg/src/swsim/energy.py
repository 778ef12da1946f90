"""ADC conversion energy accounting and sorted-vs-baseline comparison."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import AccountingError, CompareError, InvalidConfig, ModelError
from .mapper import VectorMapping, gather
from .xbar import AdcProfile, ConversionLog

FLASH = "flash"
LINEAR = "linear"
TABLE = "table"
KINDS = (FLASH, LINEAR, TABLE)


@dataclass(frozen=True)
class EnergyModel:
    """Per-conversion ADC energy plus linear driver and mux overheads.

    ``flash``: ``e0 * 2**r``; ``linear``: ``e0 * r``; ``table``: looked up by
    resolution. A resolution of 0 always costs nothing.
    """

    kind: str = FLASH
    e0: float = 1.0
    table: dict | None = None
    e_drive: float = 0.0
    e_mux: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfig(f"unknown energy model {self.kind!r}; expected one of {KINDS}")
        if self.e0 < 0 or self.e_drive < 0 or self.e_mux < 0:
            raise InvalidConfig("energy coefficients must be non-negative")
        if self.kind == TABLE:
            if not self.table:
                raise InvalidConfig("table energy model needs a non-empty table")
            object.__setattr__(self, "table", {int(k): float(v) for k, v in self.table.items()})

    @classmethod
    def parse(cls, spec) -> "EnergyModel":
        """Build from ``"flash"``, ``"linear:0.5"`` or a mapping of fields."""
        if isinstance(spec, EnergyModel):
            return spec
        if spec is None:
            return cls()
        if isinstance(spec, str):
            kind, _, e0 = spec.partition(":")
            try:
                return cls(kind=kind.strip(), e0=float(e0) if e0 else 1.0)
            except ValueError as exc:
                raise InvalidConfig(f"bad energy model spec {spec!r}") from exc
        if isinstance(spec, dict):
            unknown = set(spec) - {"kind", "e0", "table", "e_drive", "e_mux"}
            if unknown:
                raise InvalidConfig(f"unknown energy model keys: {sorted(unknown)}")
            return cls(**spec)
        raise InvalidConfig(f"bad energy model spec {spec!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["table"] is not None:
            d["table"] = {str(k): v for k, v in d["table"].items()}
        return d


def adc_conversion_energy(r: int, model: EnergyModel) -> float:
    if r <= 0:
        return 0.0
    if model.kind == FLASH:
        return model.e0 * float(2**r)
    if model.kind == LINEAR:
        return model.e0 * r
    try:
        return model.table[int(r)]
    except KeyError:
        raise ModelError(f"energy table has no entry for resolution {r}") from None


@dataclass
class EnergyReport:
    total_conversions: int
    conversions_per_column: list[int]
    adc_energy: float
    driver_energy: float
    mux_energy: float
    sections_programmed: int
    per_section: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def total_energy(self) -> float:
        return self.adc_energy + self.driver_energy + self.mux_energy

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_energy"] = self.total_energy
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyReport":
        d = {k: v for k, v in d.items() if k != "total_energy"}
        return cls(**d)


def _config_echo(mapping: VectorMapping, model: EnergyModel, profile: AdcProfile) -> dict:
    return {
        "rows_per_section": mapping.rows_per_section,
        "bits": mapping.bits,
        "order": mapping.order,
        "profile": list(profile.resolutions),
        "full_scale": profile.full_scale,
        "model": model.to_dict(),
    }


def account(log: ConversionLog, mapping: VectorMapping, x_codes, model: EnergyModel, profile: AdcProfile) -> EnergyReport:
    """Energy of one mapped weight vector over ``log.inferences`` inputs.

    ``x_codes`` (shape ``(f,)`` or ``(f, B)``) drives the row-driver count;
    ``None`` treats every programmed row as driven once per inference.
    """
    if log.active.shape != (mapping.num_sections, mapping.bits):
        raise AccountingError(
            f"log covers {log.active.shape} sections x columns, mapping has "
            f"{(mapping.num_sections, mapping.bits)}"
        )
    if tuple(log.resolutions) != tuple(profile.resolutions):
        raise AccountingError("log resolutions differ from the accounting profile")
    if not np.array_equal(log.active, mapping.active):
        raise AccountingError("log active columns do not match the mapping")

    inferences = log.inferences
    if x_codes is None:
        driven = np.count_nonzero(mapping.sources != -1, axis=1) * inferences
    else:
        x = np.asarray(x_codes)
        x = x[:, None] if x.ndim == 1 else x
        if x.shape[1] != inferences:
            raise AccountingError(f"log records {inferences} inferences, activations have {x.shape[1]}")
        g = gather(x, mapping)
        driven = np.count_nonzero(g.reshape(g.shape[0], -1), axis=1)

    col_energy = np.array([adc_conversion_energy(r, model) for r in profile.resolutions])
    performed = log.performed
    per_section = []
    adc_total = 0.0
    driver_total = 0.0
    for s in range(mapping.num_sections):
        conv = int(performed[s].sum()) * inferences
        adc = float(col_energy[performed[s]].sum()) * inferences
        drv = model.e_drive * int(driven[s])
        per_section.append({"section": s, "conversions": conv, "adc_energy": adc, "driver_energy": drv})
        adc_total += adc
        driver_total += drv

    return EnergyReport(
        total_conversions=int(performed.sum()) * inferences,
        conversions_per_column=[int(c) * inferences for c in performed.sum(axis=0)]
        if mapping.num_sections
        else [0] * mapping.bits,
        adc_energy=adc_total,
        driver_energy=driver_total,
        mux_energy=model.e_mux * mapping.feature_size * inferences,
        sections_programmed=mapping.num_sections,
        per_section=per_section,
        config=_config_echo(mapping, model, profile),
    )


def merge_reports(reports: list[EnergyReport]) -> EnergyReport:
    """Sum reports (rows of a matrix or layers of a model).

    Per-section entries are aggregated by section position, so entry ``k``
    totals the ``k``-th section of every merged mapping.
    """
    if not reports:
        raise AccountingError("nothing to merge")
    b = len(reports[0].conversions_per_column)
    if any(len(r.conversions_per_column) != b for r in reports):
        raise AccountingError("cannot merge reports with different column counts")
    by_pos: dict[int, dict] = {}
    for rep in reports:
        for entry in rep.per_section:
            agg = by_pos.setdefault(
                entry["section"],
                {"section": entry["section"], "conversions": 0, "adc_energy": 0.0, "driver_energy": 0.0},
            )
            agg["conversions"] += entry["conversions"]
            agg["adc_energy"] += entry["adc_energy"]
            agg["driver_energy"] += entry["driver_energy"]
    config = dict(reports[0].config)
    return EnergyReport(
        total_conversions=sum(r.total_conversions for r in reports),
        conversions_per_column=[sum(r.conversions_per_column[j] for r in reports) for j in range(b)],
        adc_energy=sum(r.adc_energy for r in reports),
        driver_energy=sum(r.driver_energy for r in reports),
        mux_energy=sum(r.mux_energy for r in reports),
        sections_programmed=sum(r.sections_programmed for r in reports),
        per_section=[by_pos[k] for k in sorted(by_pos)],
        config=config,
    )


@dataclass(frozen=True)
class Comparison:
    savings_fraction: float  # 1 - adc_sorted / adc_baseline
    conversion_savings: float  # 1 - conversions_sorted / conversions_baseline
    conversion_ratio: float
    section_ratio: float

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return 1.0 if num == 0 else float("inf")
    return num / den


def compare(sorted_report: EnergyReport, baseline_report: EnergyReport) -> Comparison:
    """Savings of ``sorted_report`` relative to ``baseline_report``."""
    for key in ("model", "profile", "bits", "rows_per_section"):
        a, b = sorted_report.config.get(key), baseline_report.config.get(key)
        if a != b:
            raise CompareError(f"reports differ in {key}: {a!r} vs {b!r}")
    base = baseline_report.adc_energy
    savings = 0.0 if base == 0 else 1.0 - sorted_report.adc_energy / base
    base_conv = baseline_report.total_conversions
    conv_savings = 0.0 if base_conv == 0 else 1.0 - sorted_report.total_conversions / base_conv
    return Comparison(
        savings_fraction=savings,
        conversion_savings=conv_savings,
        conversion_ratio=_ratio(sorted_report.total_conversions, base_conv),
        section_ratio=_ratio(sorted_report.sections_programmed, baseline_report.sections_programmed),
    )
