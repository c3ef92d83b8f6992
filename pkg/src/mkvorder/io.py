"""Atomic file writes and deterministic JSON/CSV serialization."""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SCHEMA_ID = "mkvorder.report"
SCHEMA_VERSION = "1.0"


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
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
    return path


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def to_jsonable(obj):
    """Convert numpy scalars/arrays, dataclasses and tuples into plain JSON types."""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    def fmt(v):
        v = to_jsonable(v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(fmt(v) for v in r))
    return "\n".join(lines) + "\n"


def write_ensembles_csv(path, ensembles) -> Path:
    """One row per (step, particle) with the particle's coordinates."""
    d = ensembles[0].states.shape[1]
    cols = ["step", "t", "particle"] + [f"x{i}" for i in range(d)]
    rows = []
    for e in ensembles:
        for i, x in enumerate(e.states):
            rows.append((e.m, e.t, i, *x))
    return atomic_write_text(path, csv_text(cols, rows))


def write_array(path, array: np.ndarray) -> Path:
    import io as _io

    buf = _io.BytesIO()
    np.save(buf, np.ascontiguousarray(array), allow_pickle=False)
    return atomic_write_bytes(path, buf.getvalue())
