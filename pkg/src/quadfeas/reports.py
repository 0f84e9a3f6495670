"""Provenance-stamped JSON documents and locale-independent CSV files.

Every report carries ``version``, ``build``, ``seed`` and an echo of the
configuration that produced it. Nothing time- or host-dependent is written,
so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

REPORT_VERSION = 1


def build_id() -> str:
    from . import BUILD

    return BUILD


def provenance(config: dict, seed) -> dict:
    return {"version": REPORT_VERSION, "build": build_id(), "seed": seed, "config": jsonable(config)}


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats to plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return [[float(v.real), float(v.imag)] for v in obj.ravel()]
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(doc: dict) -> bytes:
    return (json.dumps(jsonable(doc), indent=1, allow_nan=False) + "\n").encode("utf-8")


def csv_bytes(rows, fieldnames) -> bytes:
    """CSV with ``.`` decimals (``repr`` of floats) and ``\\n`` line endings."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _cell(row.get(k)) for k in fieldnames})
    return buf.getvalue().encode("utf-8")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return "" if v is None else v


def write_bytes(path: Path, data: bytes) -> str:
    """Write `data` to `path` and return its SHA-256 hex digest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()
