"""Serialization: grid CSV files with sidecar metadata and JSON reports."""
from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import numpy as np

from .grids import ConvexGridFn

try:
    __version__ = metadata.version("artifact")
except metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"


def clean(obj, digits=12):
    """Recursively convert to JSON types, rounding floats to ``digits`` significant digits.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``;
    Fractions become ``"p/q"`` strings.
    """
    if isinstance(obj, dict):
        return {str(k): clean(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist(), digits)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj.numerator) if obj.denominator == 1 else f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{digits}g}")
    if hasattr(obj, "to_dict"):
        return clean(obj.to_dict(), digits)
    return obj


def dumps(obj):
    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def sidecar_path(path):
    return Path(str(path) + ".json")


def write_grid_csv(fn, path, meta=None):
    """One row per node (``p1, ..., pn, value``) plus ``<path>.json`` metadata.

    Values outside the domain are written as ``inf``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pts = fn.points()
    vals = fn.values.ravel()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"p{k + 1}" for k in range(fn.dim)] + ["value"])
        for row, v in zip(pts, vals):
            w.writerow([repr(float(x)) for x in row] + [repr(float(v))])
    side = {
        "dim": fn.dim,
        "box": [[float(a[0]), float(a[-1])] for a in fn.axes],
        "resolution": [len(a) for a in fn.axes],
        "meta": {**(fn.meta or {}), **(meta or {})},
        "version": __version__,
    }
    growth = getattr(fn, "growth", None)
    if growth is not None and hasattr(growth, "normals"):
        from .polytope import polytope_to_dict
        side["polytope"] = polytope_to_dict(growth)
    sidecar_path(path).write_text(dumps(side))


def read_grid_csv(path):
    """Inverse of :func:`write_grid_csv`; the sidecar is optional.

    Without a sidecar the axes are the sorted distinct coordinates in each
    column, which must form a full tensor grid.
    """
    path = Path(path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = len(header) - 1
    data = np.array([[float(x) for x in r] for r in body if r])
    side = sidecar_path(path)
    growth = None
    meta = {}
    if side.exists():
        info = json.loads(side.read_text())
        axes = tuple(np.linspace(lo, hi, m) for (lo, hi), m in zip(info["box"], info["resolution"]))
        meta = info.get("meta", {})
        if "polytope" in info:
            from .polytope import polytope_from_dict
            growth = polytope_from_dict(info["polytope"])
    else:
        axes = tuple(np.unique(data[:, k]) for k in range(n))
    shape = tuple(len(a) for a in axes)
    if data.shape[0] != int(np.prod(shape)):
        raise ValueError(f"{path}: {data.shape[0]} rows do not fill a {shape} grid")
    idx = [np.clip(np.rint((data[:, k] - axes[k][0]) / ((axes[k][-1] - axes[k][0]) / max(1, len(axes[k]) - 1))).astype(int), 0, len(axes[k]) - 1)
           if len(axes[k]) > 1 else np.zeros(len(data), int) for k in range(n)]
    values = np.full(shape, np.inf)
    values[tuple(idx)] = data[:, -1]
    return ConvexGridFn(axes, values, growth=growth, meta=meta)
