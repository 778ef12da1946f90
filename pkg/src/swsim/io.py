"""Tensor files (NPY v1.0, CSV), experiment configs and JSON reports."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from numpy.lib import format as npy_format

from . import __version__
from .energy import EnergyModel
from .errors import ConfigError, FormatError, InvalidConfig, Unsupported
from .mapper import SHUFFLED, UNSORTED, normalize_order
from .quant import check_bits

SUPPORTED_DESCR = ("<f4", "<f8")
REPORT_KEYS = ("config", "sorted", "baseline", "comparison", "errors", "version")


# -- tensors -----------------------------------------------------------------

def _load_npy(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        try:
            version = npy_format.read_magic(fh)
        except ValueError as exc:
            raise FormatError(f"{path}: not an NPY file ({exc})") from None
        if version != (1, 0):
            raise FormatError(f"{path}: NPY version {version[0]}.{version[1]} unsupported, need 1.0")
        try:
            shape, fortran_order, dtype = npy_format.read_array_header_1_0(fh)
        except ValueError as exc:
            raise FormatError(f"{path}: bad NPY header ({exc})") from None
        if dtype.str not in SUPPORTED_DESCR:
            raise FormatError(f"{path}: dtype {dtype.str!r} unsupported, need one of {SUPPORTED_DESCR}")
        if fortran_order:
            raise Unsupported(f"{path}: Fortran-ordered arrays are not supported")
        count = math.prod(shape)
        data = fh.read(count * dtype.itemsize)
    if len(data) != count * dtype.itemsize:
        raise FormatError(f"{path}: truncated, expected {count * dtype.itemsize} data bytes, got {len(data)}")
    return np.frombuffer(data, dtype=dtype).reshape(shape).copy()


def _load_csv(path: Path) -> np.ndarray:
    try:
        arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: bad CSV ({exc})") from None
    # a single row is read back as a vector
    return arr[0] if arr.shape[0] == 1 else arr


def load_tensor(path) -> np.ndarray:
    """Load a float tensor from ``.npy`` (v1.0, little-endian f4/f8, C order) or ``.csv``."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    if path.suffix.lower() == ".csv":
        arr = _load_csv(path)
    else:
        arr = _load_npy(path)
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: tensor contains non-finite values")
    return arr


def save_tensor(t, path) -> None:
    """Write ``t`` as NPY v1.0 (or CSV for a ``.csv`` path)."""
    path = Path(path)
    arr = np.asarray(t)
    if arr.dtype.str not in SUPPORTED_DESCR:
        arr = arr.astype("<f8")
    if path.suffix.lower() == ".csv":
        if arr.ndim > 2:
            raise FormatError("CSV holds at most 2-D tensors")
        np.savetxt(path, np.atleast_2d(arr), delimiter=",", fmt="%.17g")
        return
    with open(path, "wb") as fh:
        npy_format.write_array(fh, np.ascontiguousarray(arr), version=(1, 0))


# -- config ------------------------------------------------------------------

def _default_activations() -> dict:
    return {"gaussian": {"sigma": 1.0, "batch": 1, "seed": 0}}


@dataclass
class ExperimentConfig:
    """One experiment. ``weights`` entries are file paths or
    ``{"gaussian": {"sigma", "shape", "seed"}}`` generators; ``activations`` is
    a path or ``{"gaussian": {"sigma", "batch", "seed"}}``. ``profile`` is a
    fixed resolution, ``"full"`` (lossless) or one resolution per column.
    """

    weights: list = field(default_factory=list)
    activations: object = field(default_factory=_default_activations)
    sparsity: float = 0.0
    weight_bits: int = 8
    activation_bits: int = 8
    rows_per_section: int = 128
    order: str = "sorted"
    baseline: str = UNSORTED
    seed: int = 0
    profile: object = 10
    energy_model: object = "flash"
    out: str | None = None
    workers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["energy_model"] = EnergyModel.parse(self.energy_model).to_dict()
        return d


CONFIG_KEYS = tuple(f.name for f in fields(ExperimentConfig))


def parse_profile(value, bits: int):
    """Normalize a profile spec to an int, ``"full"`` or a list of ``bits`` ints."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("full", "lossless"):
            return "full"
        parts = [p for p in text.replace(",", "-").replace(" ", "").strip("[]").split("-") if p]
        try:
            nums = [int(p) for p in parts]
        except ValueError:
            raise ConfigError(f"profile: cannot parse {value!r}") from None
        value = nums[0] if len(nums) == 1 else nums
    if isinstance(value, bool):
        raise ConfigError(f"profile: bad value {value!r}")
    if isinstance(value, (int, np.integer)):
        if value < 0:
            raise ConfigError(f"profile: resolution must be >= 0, got {value}")
        return int(value)
    if isinstance(value, (list, tuple)):
        if len(value) != bits:
            raise ConfigError(f"profile: {len(value)} resolutions given for {bits} weight bits")
        if any(not isinstance(r, (int, np.integer)) or isinstance(r, bool) or r < 0 for r in value):
            raise ConfigError(f"profile: resolutions must be non-negative integers, got {value!r}")
        return [int(r) for r in value]
    raise ConfigError(f"profile: bad value {value!r}")


def _check_generator(spec: dict, key: str, required: tuple[str, ...], allowed: tuple[str, ...]) -> dict:
    if set(spec) != {"gaussian"} or not isinstance(spec["gaussian"], dict):
        raise ConfigError(f"{key}: generator must look like {{'gaussian': {{...}}}}")
    g = dict(spec["gaussian"])
    unknown = set(g) - set(allowed)
    missing = [k for k in required if k not in g]
    if unknown:
        raise ConfigError(f"{key}: unknown generator keys {sorted(unknown)}")
    if missing:
        raise ConfigError(f"{key}: generator missing {missing}")
    if not float(g.get("sigma", 1.0)) > 0:
        raise ConfigError(f"{key}: sigma must be positive")
    return {"gaussian": g}


def config_from_dict(data: dict, strict: bool = True, base_dir=None) -> ExperimentConfig:
    """Validate a raw mapping into an :class:`ExperimentConfig`.

    Unknown keys raise :class:`ConfigError` in strict mode and warn otherwise.
    Relative tensor paths resolve against ``base_dir``.
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        if strict:
            raise ConfigError(f"unknown config keys: {unknown}")
        warnings.warn(f"ignoring unknown config keys: {unknown}", stacklevel=2)
    data = {k: v for k, v in data.items() if k in CONFIG_KEYS}
    if not data.get("weights"):
        raise ConfigError("weights: required key missing")

    def resolve(p):
        p = Path(p)
        return str(p if p.is_absolute() or base_dir is None else Path(base_dir) / p)

    weights = data["weights"]
    if isinstance(weights, (str, dict)):
        weights = [weights]
    cleaned = []
    for w in weights:
        if isinstance(w, str):
            cleaned.append(resolve(w))
        elif isinstance(w, dict):
            cleaned.append(_check_generator(w, "weights", ("shape",), ("sigma", "shape", "seed")))
        else:
            raise ConfigError(f"weights: bad entry {w!r}")
    data["weights"] = cleaned

    acts = data.get("activations", _default_activations())
    if acts is None:
        acts = _default_activations()
    if isinstance(acts, str):
        acts = resolve(acts)
    elif isinstance(acts, dict):
        acts = _check_generator(acts, "activations", (), ("sigma", "batch", "seed"))
    else:
        raise ConfigError(f"activations: bad value {acts!r}")
    data["activations"] = acts

    cfg = ExperimentConfig(**data)
    try:
        check_bits(cfg.weight_bits)
    except InvalidConfig as exc:
        raise ConfigError(f"weight_bits: {exc}") from None
    try:
        check_bits(cfg.activation_bits)
    except InvalidConfig as exc:
        raise ConfigError(f"activation_bits: {exc}") from None
    if isinstance(cfg.sparsity, bool) or not isinstance(cfg.sparsity, (int, float)) or not 0 <= cfg.sparsity <= 1:
        raise ConfigError(f"sparsity: must be a number in [0, 1], got {cfg.sparsity!r}")
    if not isinstance(cfg.rows_per_section, int) or isinstance(cfg.rows_per_section, bool) or cfg.rows_per_section < 1:
        raise ConfigError(f"rows_per_section: must be a positive integer, got {cfg.rows_per_section!r}")
    try:
        cfg.order = normalize_order(cfg.order)
    except InvalidConfig as exc:
        raise ConfigError(f"order: {exc}") from None
    try:
        cfg.baseline = normalize_order(cfg.baseline)
    except InvalidConfig as exc:
        raise ConfigError(f"baseline: {exc}") from None
    if cfg.baseline not in (UNSORTED, SHUFFLED):
        raise ConfigError(f"baseline: must be {UNSORTED!r} or {SHUFFLED!r}, got {cfg.baseline!r}")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool):
        raise ConfigError(f"seed: must be an integer, got {cfg.seed!r}")
    if not isinstance(cfg.workers, int) or cfg.workers < 1:
        raise ConfigError(f"workers: must be a positive integer, got {cfg.workers!r}")
    cfg.profile = parse_profile(cfg.profile, cfg.weight_bits)
    try:
        model = EnergyModel.parse(cfg.energy_model)
    except (InvalidConfig, TypeError) as exc:
        raise ConfigError(f"energy_model: {exc}") from None
    cfg.energy_model = model.to_dict()
    return cfg


def load_config(path, strict: bool = True, overrides: dict | None = None) -> ExperimentConfig:
    """Read a JSON config file; ``overrides`` (e.g. CLI flags) win over file values."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    data.update(overrides or {})
    return config_from_dict(data, strict=strict, base_dir=path.parent)


# -- reports -----------------------------------------------------------------

def make_report(config: ExperimentConfig | dict, sorted_block, baseline_block, comparison, errors) -> dict:
    cfg = config.to_dict() if isinstance(config, ExperimentConfig) else dict(config)
    return {
        "config": cfg,
        "sorted": sorted_block,
        "baseline": baseline_block,
        "comparison": comparison,
        "errors": errors,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def write_report(doc: dict, path) -> None:
    missing = [k for k in REPORT_KEYS if k not in doc]
    if missing:
        raise FormatError(f"report is missing keys {missing}")
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_report(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: cannot read report ({exc})") from None
    missing = [k for k in REPORT_KEYS if k not in doc]
    if missing:
        raise FormatError(f"{path}: report is missing keys {missing}")
    return doc


def strip_timestamp(doc: dict) -> dict:
    return {k: v for k, v in doc.items() if k != "timestamp"}
