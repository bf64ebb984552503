"""Experiment configuration parsing and run manifests.

Configs are flat JSON objects.  Numbers may be written as decimals or as fraction
strings (``"1/300"``); ``hbar`` also accepts ``{"two_pi_times": {"num": 577, "den": 13872}}``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import mpmath

from . import __version__
from .harness import ExperimentConfig

__all__ = ["ConfigError", "parse_number", "parse_hbar", "parse_config", "config_hash", "RunManifest"]

# short aliases accepted in files and on the command line
ALIASES = {"n": "n_realizations", "seed": "base_seed", "Dstar": "D_star"}
_FIELDS = {f.name for f in fields(ExperimentConfig)}
_INT_KEYS = {"T", "n_realizations", "base_seed", "M", "tau0", "points_per_decade", "batch_size", "check_every"}
_BOOL_KEYS = {"theory"}
_STR_KEYS = {"dist", "precision"}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def parse_number(value, key: str = "value") -> float:
    """Float from a number, a decimal string or a fraction string ``"p/q"``."""
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            pass
    raise ConfigError(f"{key}: cannot parse {value!r} as a number")


def parse_hbar(value) -> float:
    if isinstance(value, dict):
        if set(value) != {"two_pi_times"}:
            raise ConfigError(f"hbar: unknown form {value!r}")
        spec = value["two_pi_times"]
        try:
            num, den = int(spec["num"]), int(spec["den"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("hbar: two_pi_times needs integer num and den") from None
        if den == 0:
            raise ConfigError("hbar: den must be non-zero")
        with mpmath.workdps(50):
            return float(2 * mpmath.pi * num / den)
    return parse_number(value, "hbar")


def _coerce(key, value):
    if value is None:
        return None
    if key == "hbar":
        return parse_hbar(value)
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if key == "sample_times":
        return tuple(int(x) for x in value)
    num = parse_number(value, key)
    if key in _INT_KEYS:
        if num != int(num):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(num)
    return num


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Validated :class:`ExperimentConfig` from a JSON file and/or flag overrides.

    Overrides win over file values.  ``kappa`` may be replaced by the box half-width
    ``W`` (``kappa = W**2/3``); if both are present they must agree to 1e-12.
    """
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
    merged = dict(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            merged[k] = v

    values = {}
    W = None
    for key, value in merged.items():
        if key == "W":
            W = parse_number(value, "W")
            continue
        name = ALIASES.get(key, key)
        if name not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        values[name] = _coerce(name, value)

    if W is not None:
        if W < 0:
            raise ConfigError("W: must be >= 0")
        kappa_w = W * W / 3
        if "kappa" in values and not math.isclose(values["kappa"], kappa_w, rel_tol=1e-12, abs_tol=1e-15):
            raise ConfigError(f"kappa: {values['kappa']!r} disagrees with W={W!r} (W**2/3 = {kappa_w!r})")
        values.setdefault("kappa", kappa_w)

    required = ["T", "kappa"]
    if values.get("dist", "yule_simon") == "yule_simon":
        required.append("alpha")
    for key in required:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}" + (" (or W)" if key == "kappa" else ""))
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _canonical(config: ExperimentConfig) -> str:
    d = config.to_dict()
    return json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form of the resolved config."""
    return hashlib.sha256(_canonical(config).encode()).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    config_hash: str
    base_seed: int | None
    tool_version: str = __version__
    started: str = field(default_factory=_now)
    finished: str | None = None
    outputs: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @classmethod
    def for_config(cls, config: ExperimentConfig, **extra) -> "RunManifest":
        return cls(config_hash(config), config.base_seed, extra={"config": config.to_dict(), **extra})

    def finish(self) -> "RunManifest":
        self.finished = _now()
        return self

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=True) + "\n")
        return path
