"""Environment settings, experiment files and unit parsing."""

import math
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional

import yaml
from dotenv import load_dotenv

from ...errors import SpecError

DEFAULT_SEED = 20190101

RATE_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s\d.+-]*)\s*$")

# key -> kind of value ("rate", "time", "int", "float", "str", or a list of one of those)
EXPERIMENT_KEYS = {
    "model": "str",
    "graph.n_spins": "int",
    "graph.coupling": "float",
    "rates.gamma_inj": "rate",
    "rates.transmittance": "float",
    "rates.round_trip": "time",
    "rates.d_theta": "rate",
    "rates.diffusion_d": "rate",
    "opo.pump_ratio": "float",
    "opo.gamma_s": "rate",
    "opo.gamma_i": "rate",
    "opo.gamma_p": "rate",
    "opo.kappa": "rate",
    "sweep.beta_set": "list:float",
    "sweep.d_theta": "list:rate",
    "acquisition.t_a": "list:time",
    "acquisition.dt": "time",
    "ensemble.n_trajectories": "int",
    "ensemble.master_seed": "int",
    "mcmc.n_sweeps": "int",
    "mcmc.thin": "int",
    "mcmc.proposal_width": "float",
    "output.dir": "str",
}


@dataclass(frozen=True)
class Settings:
    threads: int = 1
    seed: int = DEFAULT_SEED
    log_level: str = "WARNING"
    log_file: Optional[str] = None

    @classmethod
    def from_env(cls) -> "Settings":
        load_dotenv()
        try:
            threads = int(os.getenv("NOPO_XY_THREADS", "1"))
            seed = int(os.getenv("NOPO_XY_SEED", str(DEFAULT_SEED)))
        except ValueError as exc:
            raise SpecError(f"not an integer ({exc})", field="environment") from exc
        if threads < 1:
            raise SpecError("must be at least 1", field="NOPO_XY_THREADS")
        return cls(
            threads=threads,
            seed=seed,
            log_level=os.getenv("NOPO_XY_LOG_LEVEL", "WARNING"),
            log_file=os.getenv("NOPO_XY_LOG_FILE") or None,
        )


def parse_quantity(value: Any, units: dict[str, float], field: str) -> float:
    """Number in SI units, or a string with one of ``units`` as suffix."""
    if isinstance(value, bool):
        raise SpecError(f"expected a number, got {value!r}", field=field)
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise SpecError(f"expected a number, got {value!r}", field=field)
    match = _QUANTITY.match(value)
    if match is None:
        raise SpecError(f"cannot read {value!r} as a quantity", field=field)
    number, unit = match.groups()
    if not unit:
        return float(number)
    scale = units.get(unit if unit in units else unit.lower())
    if scale is None:
        raise SpecError(f"unknown unit {unit!r} (expected one of {', '.join(units)})", field=field)
    return float(number) * scale


def parse_rate(value: Any, field: str) -> float:
    return parse_quantity(value, RATE_UNITS, field)


def parse_time(value: Any, field: str) -> float:
    return parse_quantity(value, TIME_UNITS, field)


def _coerce(kind: str, value: Any, field: str) -> Any:
    if kind.startswith("list:"):
        inner = kind.split(":", 1)[1]
        items = value if isinstance(value, (list, tuple)) else [value]
        return [_coerce(inner, item, field) for item in items]
    if kind == "rate":
        return parse_rate(value, field)
    if kind == "time":
        return parse_time(value, field)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise SpecError(f"expected an integer, got {value!r}", field=field)
        try:
            number = float(value)
        except ValueError as exc:
            raise SpecError(f"expected an integer, got {value!r}", field=field) from exc
        if not math.isfinite(number) or number != int(number):
            raise SpecError(f"expected an integer, got {value!r}", field=field)
        return int(number)
    if kind == "float":
        return parse_quantity(value, {}, field)
    return str(value)


def _flatten(mapping: dict, prefix: str = "") -> dict[str, Any]:
    flat = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def normalise_keys(raw: dict[str, Any]) -> dict[str, Any]:
    """Flatten nested sections, reject unknown keys and convert units."""
    flat = _flatten(raw)
    unknown = sorted(set(flat) - set(EXPERIMENT_KEYS))
    if unknown:
        raise SpecError(f"unknown key(s): {', '.join(unknown)}", field=unknown[0])
    return {key: _coerce(EXPERIMENT_KEYS[key], value, key) for key, value in flat.items()}


def load_experiment_file(path: Path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as handle:
        try:
            raw = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise SpecError(f"{path} is not valid YAML: {exc}", field="experiment") from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise SpecError(f"{path} must hold a mapping of keys", field="experiment")
    return normalise_keys(raw)


def parse_overrides(pairs: Iterable[str]) -> dict[str, Any]:
    """``key=value`` pairs from the command line; values are read as YAML scalars or lists."""
    raw = {}
    for pair in pairs:
        if "=" not in pair:
            raise SpecError(f"expected key=value, got {pair!r}", field="--set")
        key, value = pair.split("=", 1)
        try:
            raw[key.strip()] = yaml.safe_load(value)
        except yaml.YAMLError as exc:
            raise SpecError(f"cannot read {value!r}: {exc}", field=key.strip()) from exc
    return normalise_keys(raw)
