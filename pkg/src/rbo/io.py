"""Configuration files, CSV series, run manifests and field snapshots."""
from __future__ import annotations

import csv
import json
import math
import re
import struct
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .experiments import EXPERIMENTS, FAMILIES, ExperimentConfig
from .spectral import Field, GridSpec

__all__ = [
    "ConfigError",
    "SnapshotError",
    "parse_config",
    "config_from_mapping",
    "config_to_mapping",
    "serialize_config",
    "write_series",
    "read_series",
    "format_float",
    "snapshot_save",
    "snapshot_load",
    "RunManifest",
]

MAGIC = b"RBOF1"
_HEADER = struct.Struct("<Qd")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


class SnapshotError(OSError):
    pass


# section -> key -> ExperimentConfig attribute
_SCHEMA: dict[str, dict[str, str]] = {
    "experiment": {"name": "name", "seed": "seed"},
    "grid": {"n": "n", "L": "length"},
    "data": {"family": "family", "amplitude": "amplitude", "width": "width", "center": "center", "samples": "samples"},
    "run": {"s": "s", "r": "r", "T": "T", "dt": "dt", "stride": "stride", "t2": "t2", "times": "times"},
    "knobs": {
        "theta_primary": "theta_primary",
        "theta_probe": "theta_probe",
        "jmax": "jmax",
        "stencil": "stencil",
        "corpus_size": "corpus_size",
    },
    "picard": {"nt": "nt", "tol": "tol", "max_iter": "max_iter", "M": "M"},
    "output": {"dir": "output"},
}

_INT = {"n", "seed", "stride", "jmax", "stencil", "corpus_size", "nt", "max_iter"}
_STR = {"name", "family", "samples", "output"}
_TUPLE = {"times", "theta_primary", "theta_probe"}

_PI_RE = re.compile(r"^\s*([0-9.eE+-]*)\s*\*?\s*pi\s*$")


def _as_float(key: str, value: Any) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _PI_RE.match(value)
        if m:
            coef = m.group(1)
            try:
                return (float(coef) if coef else 1.0) * math.pi
            except ValueError:
                pass
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"{key}: expected a number (or a multiple of 'pi'), got {value!r}")


def _convert(key: str, attr: str, value: Any) -> Any:
    if attr in _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if attr in _STR:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if attr in _TUPLE:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list of numbers, got {value!r}")
        return tuple(_as_float(key, v) for v in value)
    return _as_float(key, value)


def _validate(cfg: ExperimentConfig) -> None:
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}")

    if cfg.name not in EXPERIMENTS:
        bad("name", f"unknown experiment {cfg.name!r}; choose from {sorted(EXPERIMENTS)}")
    if cfg.n < 8 or cfg.n & (cfg.n - 1):
        bad("n", f"must be a power of two >= 8, got {cfg.n}")
    if not (cfg.length > 0 and math.isfinite(cfg.length)):
        bad("L", f"must be positive and finite, got {cfg.length}")
    if cfg.family not in FAMILIES:
        bad("family", f"must be one of {FAMILIES}, got {cfg.family!r}")
    if cfg.family == "custom" and not cfg.samples:
        bad("samples", "required when family = 'custom'")
    if not cfg.width > 0:
        bad("width", f"must be positive, got {cfg.width}")
    if cfg.s < 0:
        bad("s", f"must be >= 0, got {cfg.s}")
    if cfg.r < 0:
        bad("r", f"must be >= 0, got {cfg.r}")
    if cfg.T < 0:
        bad("T", f"must be >= 0, got {cfg.T}")
    if not cfg.dt > 0:
        bad("dt", f"must be positive, got {cfg.dt}")
    if cfg.stride < 1:
        bad("stride", f"must be >= 1, got {cfg.stride}")
    if cfg.t2 <= 0:
        bad("t2", f"must be positive, got {cfg.t2}")
    if any(t < 0 for t in cfg.times):
        bad("times", "sample times must be >= 0")
    for key in ("theta_primary", "theta_probe"):
        if any(not (0 <= th < 0.5) for th in getattr(cfg, key)):
            bad(key, "theta values must lie in [0, 1/2)")
    if not (0 <= cfg.jmax <= 2):
        bad("jmax", f"must be in 0..2, got {cfg.jmax}")
    if not (2 <= cfg.stencil <= cfg.n // 4):
        bad("stencil", f"must be in 2..n/4, got {cfg.stencil}")
    if cfg.corpus_size < 1:
        bad("corpus_size", f"must be >= 1, got {cfg.corpus_size}")
    if cfg.nt < 2:
        bad("nt", f"must be >= 2, got {cfg.nt}")
    if not cfg.tol > 0:
        bad("tol", f"must be positive, got {cfg.tol}")
    if cfg.max_iter < 1:
        bad("max_iter", f"must be >= 1, got {cfg.max_iter}")


def config_from_mapping(doc: Mapping[str, Any]) -> ExperimentConfig:
    values: dict[str, Any] = {}
    for section, body in doc.items():
        if section not in _SCHEMA:
            raise ConfigError(f"{section}: unknown section; expected one of {sorted(_SCHEMA)}")
        if not isinstance(body, Mapping):
            raise ConfigError(f"{section}: expected a table")
        for key, value in body.items():
            attr = _SCHEMA[section].get(key)
            if attr is None:
                raise ConfigError(f"{section}.{key}: unknown key")
            values[attr] = _convert(key, attr, value)
    if "name" not in values:
        raise ConfigError("name: [experiment] name is required")
    cfg = ExperimentConfig(**values)
    _validate(cfg)
    return cfg


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc}") from None
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"malformed config file {p}: {exc}") from None
    return config_from_mapping(doc)


def config_to_mapping(cfg: ExperimentConfig) -> dict[str, dict[str, Any]]:
    out: dict[str, dict[str, Any]] = {}
    for section, keys in _SCHEMA.items():
        body = {}
        for key, attr in keys.items():
            value = getattr(cfg, attr)
            if value is None:
                continue
            body[key] = list(value) if isinstance(value, tuple) else value
        out[section] = body
    return out


def serialize_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(config_to_mapping(cfg))


def format_float(x: float) -> str:
    """17 significant digits; enough for a lossless double round trip."""
    return format(float(x), ".17g")


def write_series(path, series: Mapping[str, Sequence]) -> Path:
    """CSV with a header row; floats printed with 17 significant digits."""
    p = Path(path)
    cols = list(series)
    if not cols:
        raise ValueError("series has no columns")
    lengths = {len(series[c]) for c in cols}
    if len(lengths) != 1:
        raise ValueError(f"columns have unequal lengths: { {c: len(series[c]) for c in cols} }")
    try:
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in zip(*(series[c] for c in cols)):
                w.writerow([v if isinstance(v, (int, np.integer, str)) else format_float(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write series to {p}: {exc}") from exc
    return p


def read_series(path) -> dict[str, list[float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {c: [float(r[i]) for r in body] for i, c in enumerate(header)}


def snapshot_save(path, f: Field) -> Path:
    """RBOF1 magic, then little-endian u64 n, f64 L, n f64 samples."""
    p = Path(path)
    data = np.ascontiguousarray(f.values, dtype="<f8")
    try:
        with open(p, "wb") as fh:
            fh.write(MAGIC)
            fh.write(_HEADER.pack(f.grid.n, f.grid.length))
            fh.write(data.tobytes())
    except OSError as exc:
        raise SnapshotError(f"cannot write snapshot {p}: {exc}") from exc
    return p


def snapshot_load(path) -> Field:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot {p}: {exc}") from exc
    if raw[: len(MAGIC)] != MAGIC:
        raise SnapshotError(f"{p}: not an RBOF1 snapshot (bad magic)")
    off = len(MAGIC)
    if len(raw) < off + _HEADER.size:
        raise SnapshotError(f"{p}: truncated header")
    n, length = _HEADER.unpack_from(raw, off)
    off += _HEADER.size
    if len(raw) != off + 8 * n:
        raise SnapshotError(f"{p}: expected {n} samples, file holds {(len(raw) - off) / 8:g}")
    values = np.frombuffer(raw, dtype="<f8", count=n, offset=off).astype(float)
    try:
        grid = GridSpec(int(n), float(length))
    except ValueError as exc:
        raise SnapshotError(f"{p}: {exc}") from exc
    return Field.from_values(grid, values)


@dataclass
class RunManifest:
    command: str
    config: dict[str, Any]
    artifacts: list[str] = field(default_factory=list)
    version: str = ""
    duration: float = 0.0
    started: str = ""

    def missing(self) -> list[str]:
        return [a for a in self.artifacts if not Path(a).exists()]

    def write(self, path) -> Path:
        p = Path(path)
        with open(p, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True, default=str)
        return p
