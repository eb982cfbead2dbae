"""JSON job configs for the CLI: strict schemas, no silent defaults for typos.

The experiments are constant-heavy, so a misspelled override must fail loudly
instead of quietly running with the default.  Every schema therefore rejects
unknown keys by listing them, and override names are checked against the
actual bundle-factory signature.
"""

from __future__ import annotations

import inspect
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .sim import BUNDLE_BUILDERS, BUNDLE_DIMS, DEFAULT_DT, Scenario

__all__ = [
    "ConfigError",
    "ScanJob",
    "ValidateJob",
    "load_config",
    "scenario_from_config",
    "scan_job_from_config",
    "validate_job_from_config",
]

_SIM_KEYS = frozenset({"bundle", "variant", "x0", "theta0", "dt", "duration",
                       "gamma", "rate_limit", "seed", "overrides", "out"})
_SCAN_KEYS = frozenset({"bundle", "window", "resolution", "overrides",
                        "seed", "out"})
_VALIDATE_KEYS = frozenset({"bundle", "samples", "rho_scale", "overrides",
                            "seed", "out"})

_SCAN_WINDOW = ((-1.2, 1.2), (-2.0, 2.0))
_SCAN_RESOLUTION = (201, 201)


class ConfigError(ValueError):
    """A config file failed schema validation."""


@dataclass(frozen=True)
class ScanJob:
    """Set-expansion scan over a 2-D state window (wall benchmark only)."""

    window: tuple
    resolution: tuple
    overrides: Mapping = field(default_factory=dict)
    seed: int = 0
    out: Optional[str] = None

    def build_bundle(self):
        return BUNDLE_BUILDERS["double_integrator"](**dict(self.overrides))


@dataclass(frozen=True)
class ValidateJob:
    """Backup-pair audit of a configured bundle."""

    bundle_id: str
    samples: int = 400
    rho_scale: float = 1.0
    overrides: Mapping = field(default_factory=dict)
    seed: int = 0
    out: Optional[str] = None

    def build_bundle(self):
        return BUNDLE_BUILDERS[self.bundle_id](**dict(self.overrides))


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open() as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object at the top level")
    return cfg


def _check_keys(cfg: dict, allowed: frozenset) -> None:
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def _bundle_id(cfg: dict) -> str:
    if "bundle" not in cfg:
        raise ConfigError("config needs a 'bundle' key")
    bundle = cfg["bundle"]
    if bundle not in BUNDLE_BUILDERS:
        raise ConfigError(f"unknown bundle {bundle!r}, pick from "
                          f"{sorted(BUNDLE_BUILDERS)}")
    return bundle


def _overrides(cfg: dict, bundle_id: str) -> dict:
    overrides = cfg.get("overrides", {})
    if not isinstance(overrides, dict):
        raise ConfigError("'overrides' must be a JSON object")
    factory = BUNDLE_BUILDERS[bundle_id]
    valid = set(inspect.signature(factory).parameters)
    unknown = sorted(set(overrides) - valid)
    if unknown:
        raise ConfigError(
            f"unknown override keys for {bundle_id}: {', '.join(unknown)}")
    return dict(overrides)


def _number(cfg: dict, key: str, default=None):
    value = cfg.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}")
    return float(value)


def _int(cfg: dict, key: str, default: int) -> int:
    value = cfg.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    return value


def _vector(value, length: int, key: str) -> np.ndarray:
    if (not isinstance(value, Sequence) or isinstance(value, str)
            or len(value) != length
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       for v in value)):
        raise ConfigError(f"'{key}' must be a list of {length} numbers")
    return np.asarray(value, dtype=np.float64)


def scenario_from_config(cfg: dict) -> Scenario:
    _check_keys(cfg, _SIM_KEYS)
    bundle_id = _bundle_id(cfg)
    variant = cfg.get("variant")
    if variant not in ("bcbf", "gb", "agb"):
        raise ConfigError(f"'variant' must be one of ['bcbf', 'gb', 'agb'], "
                          f"got {variant!r}")
    n, _ = BUNDLE_DIMS[bundle_id]
    if "x0" not in cfg:
        raise ConfigError("config needs an 'x0' key")
    x0 = _vector(cfg["x0"], n, "x0")
    duration = _number(cfg, "duration")
    if duration is None:
        raise ConfigError("config needs a 'duration' key")
    dt = _number(cfg, "dt", DEFAULT_DT[bundle_id])
    theta0 = cfg.get("theta0")
    if theta0 is not None:
        if variant != "agb":
            raise ConfigError("'theta0' is only meaningful for the agb variant")
        p = 2 if bundle_id == "double_integrator" else 6
        theta0 = _vector(theta0, p, "theta0")
    try:
        return Scenario(
            bundle_id=bundle_id,
            variant=variant,
            x0=x0,
            duration=duration,
            dt=dt,
            theta0=theta0,
            gamma=_number(cfg, "gamma"),
            rate_limit=_number(cfg, "rate_limit"),
            seed=_int(cfg, "seed", 0),
            overrides=_overrides(cfg, bundle_id),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err


def scan_job_from_config(cfg: dict) -> ScanJob:
    _check_keys(cfg, _SCAN_KEYS)
    bundle_id = _bundle_id(cfg)
    if bundle_id != "double_integrator":
        raise ConfigError("scan-set supports the double_integrator bundle only "
                          "(2-D state grids)")
    window = cfg.get("window", [list(w) for w in _SCAN_WINDOW])
    if (not isinstance(window, Sequence) or len(window) != 2):
        raise ConfigError("'window' must be [[x1_lo, x1_hi], [x2_lo, x2_hi]]")
    window = tuple(tuple(_vector(w, 2, "window")) for w in window)
    for lo, hi in window:
        if not hi > lo:
            raise ConfigError(f"window bounds must increase, got [{lo}, {hi}]")
    resolution = cfg.get("resolution", list(_SCAN_RESOLUTION))
    if (not isinstance(resolution, Sequence) or len(resolution) != 2
            or not all(isinstance(r, int) and not isinstance(r, bool)
                       and r >= 2 for r in resolution)):
        raise ConfigError("'resolution' must be two integers >= 2")
    return ScanJob(
        window=window,
        resolution=tuple(resolution),
        overrides=_overrides(cfg, bundle_id),
        seed=_int(cfg, "seed", 0),
        out=cfg.get("out"),
    )


def validate_job_from_config(cfg: dict) -> ValidateJob:
    _check_keys(cfg, _VALIDATE_KEYS)
    bundle_id = _bundle_id(cfg)
    samples = _int(cfg, "samples", 400)
    if samples < 1:
        raise ConfigError(f"'samples' must be at least 1, got {samples}")
    rho_scale = _number(cfg, "rho_scale", 1.0)
    if rho_scale <= 0.0:
        raise ConfigError(f"'rho_scale' must be positive, got {rho_scale}")
    return ValidateJob(
        bundle_id=bundle_id,
        samples=samples,
        rho_scale=rho_scale,
        overrides=_overrides(cfg, bundle_id),
        seed=_int(cfg, "seed", 0),
        out=cfg.get("out"),
    )
