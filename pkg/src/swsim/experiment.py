"""End-to-end workflows behind the CLI: load layers, map them both ways,
simulate, account energy and summarize."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .energy import EnergyModel, EnergyReport, account, compare, merge_reports
from .errors import ConfigError, ShapeError
from .io import ExperimentConfig, load_tensor, make_report, parse_profile
from .mapper import SORTED, MatrixMapping, SectionConfig, build_matrix_mapping, permutation_overhead
from .quant import QuantizedTensor, prune_magnitude, quantize
from .theory import GaussianWeightModel, MagnitudeInterval, section_column_stats
from .xbar import AdcProfile, ConversionLog, full_scale, simulate_matmul


@dataclass
class Layer:
    name: str
    weights: np.ndarray  # float, (out, features)
    qw: QuantizedTensor
    sorted: MatrixMapping
    baseline: MatrixMapping


def make_profile(spec, bits: int, rows: int, activation_bits: int) -> AdcProfile:
    spec = parse_profile(spec, bits)
    fs = full_scale(rows, activation_bits)
    if spec == "full":
        return AdcProfile.lossless(bits, fs)
    if isinstance(spec, int):
        return AdcProfile.fixed(spec, bits, fs)
    return AdcProfile(tuple(spec), fs)


def _as_matrix(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim == 0:
        raise ShapeError("weights must have at least one dimension")
    if w.ndim == 1:
        return w[None, :]
    return w.reshape(w.shape[0], -1)


def load_weights(cfg: ExperimentConfig) -> list[tuple[str, np.ndarray]]:
    layers = []
    for i, spec in enumerate(cfg.weights):
        if isinstance(spec, dict):
            g = spec["gaussian"]
            rng = np.random.default_rng(g.get("seed", 0))
            w = rng.normal(0.0, float(g.get("sigma", 1.0)), tuple(g["shape"]))
            layers.append((f"gaussian{i}", _as_matrix(w)))
        else:
            layers.append((Path(spec).stem, _as_matrix(load_tensor(spec))))
    return layers


def prepare_layers(cfg: ExperimentConfig, rows: int | None = None, sparsity: float | None = None) -> list[Layer]:
    rows = cfg.rows_per_section if rows is None else rows
    sparsity = cfg.sparsity if sparsity is None else sparsity
    out = []
    for name, w in load_weights(cfg):
        w = prune_magnitude(w, sparsity)
        qw = quantize(w, cfg.weight_bits)
        primary = build_matrix_mapping(qw, SectionConfig(rows, cfg.order, cfg.seed))
        base = build_matrix_mapping(qw, SectionConfig(rows, cfg.baseline, cfg.seed))
        out.append(Layer(name, w, qw, primary, base))
    return out


def layer_activations(cfg: ExperimentConfig, layer: Layer, index: int) -> QuantizedTensor:
    f = layer.qw.shape[1]
    spec = cfg.activations
    if isinstance(spec, dict):
        g = spec["gaussian"]
        rng = np.random.default_rng((int(g.get("seed", 0)), index))
        x = rng.normal(0.0, float(g.get("sigma", 1.0)), (f, int(g.get("batch", 1))))
    else:
        x = load_tensor(spec)
        if x.ndim > 2 or x.shape[0] != f:
            raise ShapeError(f"activations {x.shape} do not fit layer {layer.name} with {f} features")
    return quantize(x, cfg.activation_bits)


def _account_matrix(mm: MatrixMapping, logs, x_codes, model: EnergyModel, profile: AdcProfile) -> EnergyReport:
    reports = [account(log, vm, x_codes, model, profile) for vm, log in zip(mm.rows, logs)]
    return merge_reports(reports)


def _static_logs(mm: MatrixMapping, profile: AdcProfile, inferences: int = 1) -> list[ConversionLog]:
    return [ConversionLog(vm.active, profile.resolutions, inferences) for vm in mm.rows]


def _active_histogram(mm: MatrixMapping) -> list[int]:
    hist = np.zeros(mm.bits + 1, dtype=np.int64)
    for vm in mm.rows:
        if vm.num_sections:
            hist += np.bincount(vm.active.sum(axis=1), minlength=mm.bits + 1)
    return hist.tolist()


def _column_activity(mm: MatrixMapping) -> list[int]:
    total = np.zeros(mm.bits, dtype=np.int64)
    for vm in mm.rows:
        if vm.num_sections:
            total += vm.active.sum(axis=0)
    return total.tolist()


def map_summary(cfg: ExperimentConfig) -> dict:
    layers = []
    for layer in prepare_layers(cfg):
        f = layer.qw.shape[1]
        crossbars = max(1, layer.sorted.num_sections)
        ov = permutation_overhead(f, crossbars)
        layers.append(
            {
                "name": layer.name,
                "shape": list(layer.qw.shape),
                "nonzero": int(np.count_nonzero(layer.qw.magnitudes)),
                "sorted_sections": layer.sorted.num_sections,
                "baseline_sections": layer.baseline.num_sections,
                "sorted_active_histogram": _active_histogram(layer.sorted),
                "baseline_active_histogram": _active_histogram(layer.baseline),
                "sorted_column_activity": _column_activity(layer.sorted),
                "baseline_column_activity": _column_activity(layer.baseline),
                "permutation_overhead": {
                    "mux_count": ov.mux_count,
                    "memory_cells": ov.memory_cells,
                    "time_units": ov.time_units,
                    "crossbars": crossbars,
                },
            }
        )
    return {"config": cfg.to_dict(), "layers": layers}


def _blocks(per_layer: list[tuple[str, EnergyReport]]) -> dict:
    return {
        "layers": [{"name": n, **r.to_dict()} for n, r in per_layer],
        "total": merge_reports([r for _, r in per_layer]).to_dict(),
    }


def _comparison_block(sorted_layers, base_layers, profile: AdcProfile) -> dict:
    per = []
    for (name, s), (_, b) in zip(sorted_layers, base_layers):
        per.append({"name": name, **compare(s, b).to_dict()})
    total = compare(merge_reports([r for _, r in sorted_layers]), merge_reports([r for _, r in base_layers]))
    # nothing converts at all: savings numbers carry no information
    degenerate = all(r == 0 for r in profile.resolutions) or all(r.adc_energy == 0 for _, r in base_layers)
    return {"layers": per, "total": total.to_dict(), "degenerate": degenerate}


def run_simulate(cfg: ExperimentConfig) -> dict:
    """Simulate every layer with the primary and baseline mappings."""
    model = EnergyModel.parse(cfg.energy_model)
    profile = make_profile(cfg.profile, cfg.weight_bits, cfg.rows_per_section, cfg.activation_bits)
    s_rep, b_rep, errors = [], [], []
    for i, layer in enumerate(prepare_layers(cfg)):
        qx = layer_activations(cfg, layer, i)
        sim_s = simulate_matmul(layer.sorted, qx, profile, workers=cfg.workers)
        sim_b = simulate_matmul(layer.baseline, qx, profile, workers=cfg.workers)
        s_rep.append((layer.name, _account_matrix(layer.sorted, sim_s.logs, qx.codes, model, profile)))
        b_rep.append((layer.name, _account_matrix(layer.baseline, sim_b.logs, qx.codes, model, profile)))
        errors.append(
            {
                "name": layer.name,
                "sorted": {"max_abs": sim_s.max_abs, "rmse": sim_s.rmse},
                "baseline": {"max_abs": sim_b.max_abs, "rmse": sim_b.rmse},
                "mapping_outputs_equal": bool(np.all(sim_s.outputs == sim_b.outputs)),
            }
        )
    err_block = {
        "layers": errors,
        "max_abs": max(max(e["sorted"]["max_abs"], e["baseline"]["max_abs"]) for e in errors),
    }
    return make_report(cfg, _blocks(s_rep), _blocks(b_rep), _comparison_block(s_rep, b_rep, profile), err_block)


def run_compare(cfg: ExperimentConfig, rows: int | None = None, sparsity: float | None = None, profile_spec=None) -> dict:
    """Energy comparison from mapping structure alone (one dense inference)."""
    rows = cfg.rows_per_section if rows is None else rows
    model = EnergyModel.parse(cfg.energy_model)
    profile = make_profile(cfg.profile if profile_spec is None else profile_spec, cfg.weight_bits, rows, cfg.activation_bits)
    s_rep, b_rep = [], []
    for layer in prepare_layers(cfg, rows=rows, sparsity=sparsity):
        s_rep.append((layer.name, _account_matrix(layer.sorted, _static_logs(layer.sorted, profile), None, model, profile)))
        b_rep.append((layer.name, _account_matrix(layer.baseline, _static_logs(layer.baseline, profile), None, model, profile)))
    echo = replace(cfg, rows_per_section=rows, sparsity=cfg.sparsity if sparsity is None else sparsity)
    if profile_spec is not None:
        echo.profile = parse_profile(profile_spec, cfg.weight_bits)
    return make_report(echo, _blocks(s_rep), _blocks(b_rep), _comparison_block(s_rep, b_rep, profile), None)


SWEEP_FIELDS = (
    "sparsity",
    "rows_per_section",
    "profile",
    "sorted_sections",
    "baseline_sections",
    "sorted_conversions",
    "baseline_conversions",
    "sorted_adc_energy",
    "baseline_adc_energy",
    "adc_savings",
    "conversion_savings",
)


def _profile_label(spec) -> str:
    if isinstance(spec, list):
        return "-".join(str(r) for r in spec)
    return str(spec)


def run_sweep(cfg: ExperimentConfig, sparsities, rows_list, profiles, workers: int = 1) -> list[dict]:
    """One row per (sparsity, rows, profile) cell, in grid order."""
    cells = [(s, r, parse_profile(p, cfg.weight_bits)) for s in sparsities for r in rows_list for p in profiles]
    for s, r, _ in cells:
        if not 0 <= s <= 1:
            raise ConfigError(f"sparsity: {s} outside [0, 1]")
        if r < 1:
            raise ConfigError(f"rows_per_section: {r} must be >= 1")

    def run(cell):
        s, r, p = cell
        doc = run_compare(cfg, rows=r, sparsity=s, profile_spec=p)
        st, bt = doc["sorted"]["total"], doc["baseline"]["total"]
        comp = doc["comparison"]["total"]
        return {
            "sparsity": s,
            "rows_per_section": r,
            "profile": _profile_label(p),
            "sorted_sections": st["sections_programmed"],
            "baseline_sections": bt["sections_programmed"],
            "sorted_conversions": st["total_conversions"],
            "baseline_conversions": bt["total_conversions"],
            "sorted_adc_energy": st["adc_energy"],
            "baseline_adc_energy": bt["adc_energy"],
            "adc_savings": comp["savings_fraction"],
            "conversion_savings": comp["conversion_savings"],
        }

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, cells))
    return [run(c) for c in cells]


ANALYZE_FIELDS = (
    "layer",
    "row",
    "section",
    "min_code",
    "max_code",
    "msb_column",
    "active_columns",
    "expected_active_columns",
)


def run_analyze(cfg: ExperimentConfig, max_rows: int | None = None) -> tuple[dict, list[dict]]:
    """Per-section active columns of the sorted mapping next to the Gaussian prediction.

    The prediction treats a section's rows as independent draws from
    ``N(0, sigma)`` restricted to the section's magnitude band, with ``sigma``
    the standard deviation of the layer's unpruned weights.
    """
    summary = {"layers": []}
    rows_out = []
    cache: dict = {}
    for name, w in load_weights(cfg):
        sigma = float(np.std(w)) or 1.0
        pruned = prune_magnitude(w, cfg.sparsity)
        qw = quantize(pruned, cfg.weight_bits)
        mm = build_matrix_mapping(qw, SectionConfig(cfg.rows_per_section, SORTED, cfg.seed))
        model = GaussianWeightModel(sigma)
        s, b = qw.scale, qw.bits
        codes, counts = np.unique(qw.magnitudes, return_counts=True)
        summary["layers"].append(
            {
                "name": name,
                "shape": list(qw.shape),
                "sigma": sigma,
                "scale": s,
                "sparsity": float(1 - np.count_nonzero(qw.magnitudes) / qw.magnitudes.size),
                "code_histogram": {int(c): int(n) for c, n in zip(codes, counts)},
            }
        )
        for r, vm in enumerate(mm.rows[:max_rows]):
            msb = vm.most_significant_active()
            for k in range(vm.num_sections):
                real = vm.sources[k] != -1
                mags = vm.magnitudes[k][real]
                lo_c, hi_c = int(mags.min()), int(mags.max())
                key = (sigma, s, b, lo_c, hi_c, int(real.sum()))
                if key not in cache:
                    band = MagnitudeInterval(max(0.0, (lo_c - 0.5) * s), min((hi_c + 0.5) * s, ((1 << b) - 1) * s))
                    cache[key] = section_column_stats(model, band, int(real.sum()), b, s)["expected_active_columns"]
                rows_out.append(
                    {
                        "layer": name,
                        "row": r,
                        "section": k,
                        "min_code": lo_c,
                        "max_code": hi_c,
                        "msb_column": int(msb[k]),
                        "active_columns": int(vm.active[k].sum()),
                        "expected_active_columns": round(cache[key], 6),
                    }
                )
    return summary, rows_out


def fmt_pct(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return f"{100 * x:.2f}%"
