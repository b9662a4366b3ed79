"""Experiment configs, artifact serialisation and atomic output."""

from __future__ import annotations

import datetime as _dt
import json
import math
import os
import tempfile
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np
import yaml

SCHEMA_VERSION = "longtail-lab/1"
EXPERIMENTS = ("family-report", "ratio-sweep", "convolve", "classify", "compound",
               "oracle-crosscheck", "acceptance-suite")


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


class ConfigError(ValueError):
    """Config document failed validation."""


_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}

_family = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family", "alpha", "a"],
    "properties": {
        "family": {"enum": ["family1", "family2"]},
        "alpha": _num, "b": _num, "t": _num, "a": _num,
        "n_max": {"type": "integer", "minimum": 2},
        "trunc_tol": _num,
    },
}

_grid = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "depth": _pos_int,
        "n_points": _pos_int,
        "points": {"type": "array", "items": _num, "minItems": 1},
    },
}

_counting = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["poisson", "geometric", "power_law", "explicit"]},
        "mu": _num, "p": _num, "beta": _num,
        "probs": {"type": "array", "items": _num, "minItems": 1},
    },
}

_params = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "c": _num,
        "c_values": {"type": "array", "items": _num, "minItems": 1},
        "order": _pos_int,
        "depth": _pos_int,
        "n_points": _pos_int,
        "burn_in": {"type": "integer", "minimum": 0},
        "classes": {"type": "array", "items": {"enum": ["L", "OL", "OS", "D"]}, "minItems": 1},
        "grid": _grid,
        "tol": _num,
        "counting": _counting,
        "cstar2": _num,
        "eps": _num,
        "eps0": _num,
        "n_samples": _pos_int,
        "points_per_scale": _pos_int,
        "export_batch": {"type": "boolean"},
        "mc_samples": _pos_int,
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "family": _family,
        "params": _params,
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"prefix": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"}},
        },
    },
    "allOf": [
        {"if": {"properties": {"experiment": {"not": {"const": "acceptance-suite"}}}},
         "then": {"required": ["family"]}},
    ],
}

REFERENCE_FAMILY = {"family": "family1", "alpha": 0.5, "b": 1.0, "t": 1.0, "a": 3.0, "n_max": 6}


def validate_config(cfg) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    return cfg


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"unparseable config: {exc}") from None
    return validate_config(cfg)


# ---------------------------------------------------------------- serialisation


def _plain(obj):
    """Convert numpy scalars and arrays, and non-finite floats, for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def json_document(body: dict, config: dict, stamp: str | None = None) -> str:
    """Deterministic JSON; the timestamp sits alone on the first content line."""
    head = json.dumps({"generated_at": stamp or timestamp()})[1:-1]
    rest = {"schema_version": SCHEMA_VERSION, "tool_version": tool_version(),
            "config": config, **body}
    text = json.dumps(_plain(rest), indent=2, sort_keys=True, allow_nan=False)
    return "{\n  " + head + ",\n" + text[2:] + "\n"


def csv_header(config: dict, extra: dict | None = None, stamp: str | None = None) -> dict:
    """Ordered header lines for a CSV artifact; the timestamp is its own line."""
    out = {"generated_at": stamp or timestamp(), "schema_version": SCHEMA_VERSION,
           "tool_version": tool_version(),
           "config": json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))}
    for k, v in (extra or {}).items():
        out[k] = json.dumps(_plain(v), sort_keys=True, separators=(",", ":")) \
            if not isinstance(v, str) else v
    return out


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


class ArtifactSet:
    """Artifacts staged in memory and written only by ``commit``.

    A run that fails before ``commit`` leaves nothing on disk.
    """

    def __init__(self, out_dir, prefix: str = ""):
        self.out_dir = Path(out_dir)
        self.prefix = prefix
        self._staged: list[tuple[str, bytes]] = []

    def add_text(self, name: str, text: str) -> None:
        self._staged.append((self.prefix + name, text.encode("utf-8")))

    def add_bytes(self, name: str, data: bytes) -> None:
        self._staged.append((self.prefix + name, data))

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self._staged]

    def commit(self) -> list[Path]:
        written = []
        try:
            for name, data in self._staged:
                p = self.out_dir / name
                atomic_write_bytes(p, data)
                written.append(p)
        except BaseException:
            for p in written:
                p.unlink(missing_ok=True)
            raise
        return written
