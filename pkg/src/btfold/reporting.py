"""Experiment configuration files, run directories and report writers.

Configurations are flat ``key = value`` text files. Values are parsed as
int, float, bool, comma-separated float lists or plain strings. Floats are
written with ``repr`` so that ``parse(serialize(cfg)) == cfg``.
"""
import csv
import hashlib
import json
import math
import os
from collections.abc import Mapping

import numpy as np

from .errors import ConfigError

__all__ = ["ExperimentConfig", "parse_config", "serialize_config", "load_config",
           "write_json", "write_csv", "run_directory", "SCHEMA_VERSION", "to_jsonable"]

SCHEMA_VERSION = "1.0"
# keys that only affect how a run executes, not what it computes
_EXECUTION_KEYS = ("threads",)


def _parse_value(text):
    s = text.strip()
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", ""):
        return None
    if "," in s:
        try:
            return tuple(float(v) for v in s.split(",") if v.strip())
        except ValueError:
            return s
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _format_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        if len(v) == 1:
            return repr(float(v[0])) + ","
        return ",".join(repr(float(x)) for x in v)
    s = str(v)
    if "\n" in s or "=" in s:
        raise ConfigError(f"value {s!r} cannot be stored in a flat config")
    return s


class ExperimentConfig(Mapping):
    """Immutable mapping of configuration keys to parsed values."""

    def __init__(self, values=None, **kw):
        d = dict(values or {})
        d.update(kw)
        for k in d:
            if not k or any(c in k for c in "= \t\n#"):
                raise ConfigError(f"invalid key {k!r}")
        self._d = {k: (tuple(float(x) for x in v) if isinstance(v, list) else v) for k, v in d.items()}

    def __getitem__(self, k):
        return self._d[k]

    def __iter__(self):
        return iter(sorted(self._d))

    def __len__(self):
        return len(self._d)

    def __eq__(self, other):
        return isinstance(other, Mapping) and dict(self) == dict(other)

    def __hash__(self):
        return hash(serialize_config(self))

    def __repr__(self):
        return f"ExperimentConfig({self._d!r})"

    def merged(self, other):
        d = dict(self._d)
        d.update({k: v for k, v in dict(other).items() if v is not None})
        return ExperimentConfig(d)

    def digest(self, length=12):
        """Hash of the serialized config without execution-only keys."""
        d = {k: v for k, v in self._d.items() if k not in _EXECUTION_KEYS}
        return hashlib.sha256(serialize_config(d).encode()).hexdigest()[:length]


def parse_config(text):
    """Parse flat ``key = value`` text; ``#`` starts a comment."""
    d = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        k, v = line.split("=", 1)
        k = k.strip()
        if k in d:
            raise ConfigError(f"line {n}: duplicate key {k!r}")
        d[k] = _parse_value(v)
    return ExperimentConfig(d)


def serialize_config(cfg):
    """Sorted ``key = value`` lines ending with a newline."""
    return "".join(f"{k} = {_format_value(cfg[k])}\n" for k in sorted(cfg))


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def to_jsonable(obj):
    """Convert numpy values, tuples and non-finite floats for JSON output."""
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isfinite(f):
            return f
        return "nan" if math.isnan(f) else ("inf" if f > 0 else "-inf")
    return obj


def write_json(path, data):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(to_jsonable(data), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_csv(path, header, rows):
    """RFC 4180 CSV with a header row; floats written with ``repr``."""
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return repr(float(v))
        if isinstance(v, (np.integer,)):
            return str(int(v))
        return v

    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([cell(v) for v in r])


def run_directory(out, experiment, cfg):
    """Create ``out/<experiment>-<config hash>`` and return its path."""
    path = os.path.join(out, f"{experiment}-{cfg.digest()}")
    os.makedirs(path, exist_ok=True)
    return path
