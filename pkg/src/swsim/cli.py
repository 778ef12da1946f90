"""``swsim`` command-line interface.

Exit codes: 0 success, 1 invalid input (config, files, arguments), 2 runtime
failure. Flags override config-file values, which override defaults.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

from . import __version__
from .errors import (
    ConfigError,
    FormatError,
    InvalidCode,
    InvalidConfig,
    InvalidTensor,
    NumericalError,
    ShapeError,
)
from .experiment import (
    ANALYZE_FIELDS,
    SWEEP_FIELDS,
    fmt_pct,
    map_summary,
    run_analyze,
    run_compare,
    run_simulate,
    run_sweep,
)
from .io import config_from_dict, load_config, write_report
from .theory import (
    BitPrefixInterval,
    GaussianWeightModel,
    MagnitudeInterval,
    conditional_bit_zero_probability,
    expected_active_probability,
    is_non_increasing,
    monte_carlo_bit_stats,
    prefix_probability_scan,
    section_bit_zero_probability,
)

VALIDATION_ERRORS = (ConfigError, InvalidConfig, FormatError, ShapeError, InvalidTensor, InvalidCode)


def _experiment_flags(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--weights", action="append", help="weight tensor (.npy/.csv); repeat for several layers")
    p.add_argument("--activations", help="activation tensor, shape (features,) or (features, batch)")
    if sweep:
        p.add_argument("--sparsity", default="0,0.5,0.9", help="comma-separated sparsity levels")
        p.add_argument("--rows", default="128", help="comma-separated rows per section")
        p.add_argument("--profile", action="append", help="ADC profile, e.g. 10, full or 10-10-10-10-10-9-9-8; repeatable")
    else:
        p.add_argument("--sparsity", type=float, help="magnitude-pruning fraction in [0, 1]")
        p.add_argument("--rows", type=int, help="rows per crossbar section")
        p.add_argument("--profile", help="ADC profile: fixed resolution, 'full', or one value per column (10-10-9-8...)")
    p.add_argument("--bits", type=int, help="weight magnitude bits (crossbar columns)")
    p.add_argument("--abits", type=int, help="activation magnitude bits")
    p.add_argument("--order", help="primary mapping order: sorted, unsorted or shuffled")
    p.add_argument("--baseline", help="baseline mapping order: unsorted or shuffled")
    p.add_argument("--seed", type=int, help="seed for shuffled baselines")
    p.add_argument("--energy-model", help="flash, linear or flash:E0 / linear:E0")
    p.add_argument("--out", help="output path")
    p.add_argument("--workers", type=int, help="worker threads")
    p.add_argument("--strict", dest="strict", action="store_true", default=True, help="reject unknown config keys (default)")
    p.add_argument("--lenient", dest="strict", action="store_false", help="warn on unknown config keys")


_FLAG_KEYS = {
    "weights": "weights",
    "activations": "activations",
    "sparsity": "sparsity",
    "rows": "rows_per_section",
    "bits": "weight_bits",
    "abits": "activation_bits",
    "order": "order",
    "baseline": "baseline",
    "seed": "seed",
    "profile": "profile",
    "energy_model": "energy_model",
    "out": "out",
    "workers": "workers",
}


def _build_config(args, skip=()):
    overrides = {
        key: getattr(args, attr)
        for attr, key in _FLAG_KEYS.items()
        if attr not in skip and getattr(args, attr, None) is not None
    }
    if args.config:
        return load_config(args.config, strict=args.strict, overrides=overrides)
    return config_from_dict(overrides, strict=args.strict)


def _emit(doc: dict, out: str | None) -> None:
    if out:
        write_report(doc, out)
        print(f"report written to {out}")


def cmd_map(args) -> int:
    cfg = _build_config(args)
    summary = map_summary(cfg)
    for layer in summary["layers"]:
        ov = layer["permutation_overhead"]
        print(
            f"{layer['name']}: shape={layer['shape']} nonzero={layer['nonzero']} "
            f"sections sorted={layer['sorted_sections']} baseline={layer['baseline_sections']} "
            f"muxes={ov['mux_count']} perm_time={ov['time_units']}"
        )
        print(f"  active-column histogram sorted={layer['sorted_active_histogram']} baseline={layer['baseline_active_histogram']}")
    if cfg.out:
        Path(cfg.out).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        print(f"summary written to {cfg.out}")
    return 0


def _print_comparison(doc: dict) -> None:
    comp = doc["comparison"]
    for layer in comp["layers"]:
        print(
            f"{layer['name']}: adc savings={fmt_pct(layer['savings_fraction'])} "
            f"conversion savings={fmt_pct(layer['conversion_savings'])}"
        )
    tot = comp["total"]
    st, bt = doc["sorted"]["total"], doc["baseline"]["total"]
    print(
        f"total: conversions sorted={st['total_conversions']} baseline={bt['total_conversions']} "
        f"adc energy sorted={st['adc_energy']:g} baseline={bt['adc_energy']:g} savings={fmt_pct(tot['savings_fraction'])}"
    )
    if comp["degenerate"]:
        print("warning: degenerate comparison, no ADC conversions in the baseline", file=sys.stderr)


def cmd_simulate(args) -> int:
    cfg = _build_config(args)
    doc = run_simulate(cfg)
    for e in doc["errors"]["layers"]:
        print(f"{e['name']}: max_abs error sorted={e['sorted']['max_abs']:g} baseline={e['baseline']['max_abs']:g}")
    print(f"max_abs error: {doc['errors']['max_abs']:g}")
    _print_comparison(doc)
    _emit(doc, cfg.out)
    return 0


def cmd_compare(args) -> int:
    cfg = _build_config(args)
    doc = run_compare(cfg)
    _print_comparison(doc)
    _emit(doc, cfg.out)
    return 0


def _write_csv(rows, fieldnames, out: str | None) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if out:
            fh.close()


def cmd_analyze(args) -> int:
    cfg = _build_config(args)
    summary, rows = run_analyze(cfg, max_rows=args.max_rows)
    for layer in summary["layers"]:
        print(
            f"# {layer['name']}: shape={layer['shape']} sigma={layer['sigma']:.6g} "
            f"sparsity={layer['sparsity']:.4f} scale={layer['scale']:.6g}",
            file=sys.stderr if not cfg.out else sys.stdout,
        )
    _write_csv(rows, ANALYZE_FIELDS, cfg.out)
    return 0


def _split(text: str, cast):
    try:
        return [cast(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def cmd_sweep(args) -> int:
    cfg = _build_config(args, skip=("sparsity", "rows", "profile"))
    sparsities = _split(args.sparsity, float)
    rows = _split(args.rows, int)
    profiles = args.profile or [cfg.profile]
    table = run_sweep(cfg, sparsities, rows, profiles, workers=cfg.workers)
    _write_csv(table, SWEEP_FIELDS, cfg.out)
    if cfg.out:
        print(f"{len(table)} sweep rows written to {cfg.out}")
    return 0


def cmd_theory(args) -> int:
    model = GaussianWeightModel(args.sigma)
    if args.lo is not None or args.hi is not None:
        if args.lo is None or args.hi is None or args.column is None or args.scale is None:
            raise InvalidConfig("section queries need --lo, --hi, --column and --scale")
        band = MagnitudeInterval(args.lo, args.hi)
        analytic = section_bit_zero_probability(model, band, args.column, args.bits, args.scale)
        mc = monte_carlo_bit_stats(model, band, args.column, args.samples, args.seed, bits=args.bits, scale=args.scale)
        print(f"P(column {args.column} = 0) analytic={analytic:.6f}")
        print(f"monte carlo={mc.probability:.6f} stderr={mc.stderr:.2g} samples={mc.accepted}")
        print(f"difference={mc.probability - analytic:+.6f}")
        print(f"P(column {args.column} active, R={args.rows}) = {expected_active_probability(model, band, args.rows, args.column, args.bits, args.scale):.6f}")
        return 0
    analytic = conditional_bit_zero_probability(model, args.lower, args.n)
    mc = monte_carlo_bit_stats(model, BitPrefixInterval(args.lower, args.n), args.n, args.samples, args.seed)
    print(f"P(a_{args.n} = 0 | L={args.lower:g}) analytic={analytic:.6f}")
    print(f"monte carlo={mc.probability:.6f} stderr={mc.stderr:.2g} samples={mc.accepted}")
    print(f"difference={mc.probability - analytic:+.6f}")
    if args.scan:
        Ls = [float(v) for v in args.scan.split(",")]
        scan = prefix_probability_scan(model, Ls, args.n)
        for L, p in scan:
            print(f"  L={L:g} P={p:.6f}")
        trend = "non-increasing" if is_non_increasing([p for _, p in scan]) else "NOT monotonically decreasing"
        print(f"scan over L is {trend}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swsim", description="Sorted weight sectioning crossbar simulator")
    parser.add_argument("--version", action="version", version=f"swsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("map", help="section counts and active columns, sorted vs baseline")
    _experiment_flags(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("simulate", help="functional crossbar simulation with energy report")
    _experiment_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="ADC energy of sorted vs baseline mappings")
    _experiment_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("analyze", help="per-section active columns vs Gaussian prediction (CSV)")
    _experiment_flags(p)
    p.add_argument("--max-rows", type=int, default=None, help="analyze at most this many output rows per layer")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="sparsity x rows x profile grid, one CSV row per cell")
    _experiment_flags(p, sweep=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("theory", help="bit-zero probabilities of Gaussian weights")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--lower", "-L", type=float, default=0.0, help="prefix interval lower bound L")
    p.add_argument("--n", type=int, default=1, help="bit position split by the midpoint")
    p.add_argument("--scan", help="comma-separated L values to tabulate")
    p.add_argument("--lo", type=float, help="section magnitude band lower bound")
    p.add_argument("--hi", type=float, help="section magnitude band upper bound")
    p.add_argument("--column", type=int, help="crossbar column (0 = most significant)")
    p.add_argument("--bits", type=int, default=8)
    p.add_argument("--scale", type=float, help="weight units per code")
    p.add_argument("--rows", type=int, default=128)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_theory)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                return args.func(args)
            finally:
                for w in caught:
                    print(f"warning: {w.message}", file=sys.stderr)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1 if args.command == "theory" else 2
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
