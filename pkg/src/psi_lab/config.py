"""JSON experiment configuration with unit-suffixed scalars.

Scalars may be plain numbers (SI) or strings such as ``"20 ms"``,
``"0.2 mm"``, ``"6 uK"``, ``"3 G"``. Every field is converted to SI on
load. Unknown fields are rejected by name.

Schema (all optional, defaults from :class:`ExperimentConfig`)::

    species            "87Rb" or an object with mass, wavelength,
                       hyperfine_splitting, saturation_intensity,
                       electron_g_factor, bohr_magneton_over_h
    lmt_order          integer n >= 0
    big_t              time
    extra_intervals    list of times, or "default" for T (n+1-j)/(n+1)
    contrast           number in (0, 1]
    atom_number        integer
    sigma_0            length
    temperature        temperature
    bias_velocity      velocity
    expansion_time     time
    cycle_time         time
    mot_load_time      time
    pixel_pitch        length
    grid_size          [nx, ny]

Optional analysis inputs, kept in ``cfg.extras``::

    sigma_f            length, overrides the expansion-derived radius
    k_omega            fringe wavevector, rad/m
    k_omega_sigma_f    fringe wavevector times sigma_f (default 20)
    rotation_rate      rad/s, gives k_omega = k_eff Omega (T + sum T_j)
    phi_a              rad
    acceleration       m/s^2, gives phi_a from the LMT acceleration phase
    tau                averaging time
    eta_per_pulse      LMT per-pulse efficiency
    n_max              largest LMT order scanned
    length_scale       broadening length scale
    zeeman             {b_first_half, b_second_half, gradient, T, phase_budget}
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from pathlib import Path

from .errors import ConfigError
from .physics import RB87, ExperimentConfig, SpeciesData, default_extra_intervals

__all__ = ["UNITS", "parse_quantity", "config_from_dict", "load_config", "config_hash", "config_to_dict"]

UNITS = {
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9},
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "temperature": {"K": 1.0, "mK": 1e-3, "uK": 1e-6, "µK": 1e-6, "nK": 1e-9},
    "velocity": {"m/s": 1.0, "cm/s": 1e-2, "mm/s": 1e-3},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "field": {"G": 1.0, "mG": 1e-3},
    "gradient": {"G/cm": 1.0, "G/m": 1e-2},
    "wavenumber": {"rad/m": 1.0, "1/m": 1.0, "rad/mm": 1e3},
    "rate": {"rad/s": 1.0, "mrad/s": 1e-3, "urad/s": 1e-6},
    "acceleration": {"m/s^2": 1.0, "m/s2": 1.0, "g": 9.80665},
    "angle": {"rad": 1.0, "mrad": 1e-3},
    "mass": {"kg": 1.0, "amu": 1.66053906660e-27},
    "intensity": {"W/m^2": 1.0, "mW/cm^2": 10.0},
    "field_frequency": {"Hz/G": 1.0, "kHz/G": 1e3, "MHz/G": 1e6},
    "dimensionless": {"": 1.0},
}

FIELDS = {
    "lmt_order": "int",
    "big_t": "time",
    "extra_intervals": "time",
    "contrast": "dimensionless",
    "atom_number": "int",
    "sigma_0": "length",
    "temperature": "temperature",
    "bias_velocity": "velocity",
    "expansion_time": "time",
    "cycle_time": "time",
    "mot_load_time": "time",
    "pixel_pitch": "length",
    "grid_size": "int",
}
EXTRAS = {
    "sigma_f": "length",
    "k_omega": "wavenumber",
    "k_omega_sigma_f": "dimensionless",
    "rotation_rate": "rate",
    "phi_a": "angle",
    "acceleration": "acceleration",
    "tau": "time",
    "eta_per_pulse": "dimensionless",
    "n_max": "int",
    "length_scale": "length",
}
ZEEMAN = {"b_first_half": "field", "b_second_half": "field", "gradient": "gradient", "T": "time", "phase_budget": "angle"}
SPECIES = {
    "name": "str",
    "mass": "mass",
    "wavelength": "length",
    "hyperfine_splitting": "frequency",
    "saturation_intensity": "intensity",
    "electron_g_factor": "dimensionless",
    "bohr_magneton_over_h": "field_frequency",
}
BUILTIN_SPECIES = {"87Rb": RB87, "Rb87": RB87}

_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


def parse_quantity(value, kind: str, field: str) -> float:
    """Convert a number or "<number> <unit>" string of the given kind to SI."""
    if isinstance(value, bool):
        raise ConfigError(f"expected a {kind} quantity, got {value!r}", field=field)
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected a {kind} quantity, got {value!r}", field=field)
    m = _QTY.match(value)
    if not m:
        raise ConfigError(f"cannot parse quantity {value!r}", field=field)
    number, unit = float(m.group(1)), m.group(2)
    if not unit:  # bare number: already SI
        return number
    table = UNITS[kind]
    if unit not in table:
        known = ", ".join(u for u in table if u) or "none"
        raise ConfigError(f"unit {unit!r} is not a {kind} unit (known: {known})", field=field)
    return number * table[unit]


def _parse_int(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
        raise ConfigError(f"expected an integer, got {value!r}", field=field)
    return int(value)


def _convert(value, kind, field):
    if kind == "int":
        if isinstance(value, list):
            return tuple(_parse_int(v, f"{field}[{i}]") for i, v in enumerate(value))
        return _parse_int(value, field)
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", field=field)
        return value
    return parse_quantity(value, kind, field)


def _species(doc):
    if isinstance(doc, str):
        if doc not in BUILTIN_SPECIES:
            raise ConfigError(f"unknown species {doc!r}; give the full record instead", field="species")
        return BUILTIN_SPECIES[doc]
    if not isinstance(doc, dict):
        raise ConfigError("must be a species name or an object", field="species")
    unknown = set(doc) - set(SPECIES)
    if unknown:
        raise ConfigError(f"unknown species fields {sorted(unknown)}", field="species")
    missing = set(SPECIES) - set(doc) - {"name"}
    if missing:
        raise ConfigError(f"missing species fields {sorted(missing)}", field="species")
    kw = {k: _convert(v, SPECIES[k], f"species.{k}") for k, v in doc.items()}
    kw.setdefault("name", "custom")
    return SpeciesData(**kw)


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    kw, extras = {}, {}
    intervals = None
    for key, value in doc.items():
        if key.startswith("_"):  # comments
            continue
        if key == "species":
            kw["species"] = _species(value)
        elif key == "extra_intervals":
            intervals = value
        elif key in FIELDS:
            kw[key] = _convert(value, FIELDS[key], key)
        elif key in EXTRAS:
            extras[key] = _convert(value, EXTRAS[key], key)
        elif key == "zeeman":
            if not isinstance(value, dict):
                raise ConfigError("must be an object", field="zeeman")
            bad = set(value) - set(ZEEMAN)
            if bad:
                raise ConfigError(f"unknown fields {sorted(bad)}", field="zeeman")
            extras["zeeman"] = {k: _convert(v, ZEEMAN[k], f"zeeman.{k}") for k, v in value.items()}
        else:
            raise ConfigError("unknown configuration field", field=key)
    n = kw.get("lmt_order", 0)
    if intervals is None or intervals == "default":
        big_t = kw.get("big_t", ExperimentConfig.big_t)
        kw["extra_intervals"] = default_extra_intervals(n, big_t) if isinstance(n, int) else ()
    elif isinstance(intervals, list):
        kw["extra_intervals"] = tuple(parse_quantity(v, "time", f"extra_intervals[{i + 1}]") for i, v in enumerate(intervals))
    else:
        raise ConfigError("must be a list of times or \"default\"", field="extra_intervals")
    cfg = ExperimentConfig(**kw, extras=extras)
    if cfg.sigma_0 >= extras.get("sigma_f", cfg.sigma_f):
        raise ConfigError(f"sigma_0 ({cfg.sigma_0!r} m) must be below sigma_f", field="sigma_0")
    for key in ("k_omega", "k_omega_sigma_f", "eta_per_pulse"):
        if key in extras and not (math.isfinite(extras[key]) and extras[key] > 0):
            raise ConfigError("must be positive", field=key)
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read and validate a configuration file.

    Raises
    ------
    ConfigError
        Missing or unreadable file, invalid JSON, or an invalid field.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file {str(path)!r}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(doc)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """SI-valued document that loads back to an equal configuration."""
    out = {
        "species": cfg.species.to_dict(),
        "lmt_order": cfg.lmt_order,
        "big_t": cfg.big_t,
        "extra_intervals": list(cfg.extra_intervals),
        "contrast": cfg.contrast,
        "atom_number": cfg.atom_number,
        "sigma_0": cfg.sigma_0,
        "temperature": cfg.temperature,
        "bias_velocity": cfg.bias_velocity,
        "expansion_time": cfg.expansion_time,
        "cycle_time": cfg.cycle_time,
        "mot_load_time": cfg.mot_load_time,
        "pixel_pitch": cfg.pixel_pitch,
        "grid_size": list(cfg.grid_size),
    }
    out.update(cfg.extras)
    return out


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical SI form of ``cfg``."""
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
