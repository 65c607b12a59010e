"""Deterministic CSV and JSON rendering.

Everything is rendered to strings first and written only once a command has
finished, so a failing run leaves no partial artifacts behind.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """Full double precision; integers stay integers, infinities read ``inf``."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def render_csv(header, rows, seed=None, comments=()) -> str:
    buf = io.StringIO()
    if seed is not None:
        buf.write(f"# seed={seed}\n")
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def render_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def matrix_rows(mat):
    """Rows ``(row, col, re, im)`` of a complex matrix, row-major."""
    mat = np.asarray(mat, dtype=complex)
    for (i, j), v in np.ndenumerate(mat):
        yield i, j, v.real, v.imag


def write_all(out_dir, files: dict) -> list:
    """Write ``{name: text}`` into ``out_dir`` in sorted order; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in sorted(files):
        path = out / name
        with open(path, "w", newline="") as fh:
            fh.write(files[name])
        paths.append(path)
    return paths
