"""CSV/JSON emission shared by the CLI tasks."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def fmt(x) -> str:
    """17 significant digits (exact round trip for doubles); blanks for missing values."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    return format(x, ".17g")


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_default)
        fh.write("\n")
    return path


def sidecar(path, meta: dict) -> Path:
    """Metadata next to an output file: ``x.csv`` -> ``x.csv.json``."""
    path = Path(path)
    return write_json(path.with_name(path.name + ".json"), {"code_version": __version__, **meta})


def mean_sem(values):
    vals = np.asarray([v for v in values if v is not None], dtype=float)
    if vals.size == 0:
        return None, None, 0
    if vals.size == 1:
        return float(vals[0]), None, 1
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)), int(vals.size)
