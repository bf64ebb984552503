"""CSV emission and read-back.

Values are written with 17 significant digits so that a read-back reproduces every
float64 bit for bit.  Each CSV gets a JSON sidecar ``<name>.manifest.json``; the CSV
itself carries no timestamps, so repeated identical runs give identical bytes.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .config import RunManifest
from .harness import EnsembleResult
from .renewal import RenewalTables
from .theory import PredictionSeries

__all__ = [
    "format_value",
    "write_csv",
    "read_series",
    "emit_series",
    "emit_grid",
    "manifest_path",
]


def format_value(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def write_csv(path, header, columns) -> Path:
    """Write equal-length ``columns`` under ``header``; integer columns stay integers."""
    path = Path(path)
    cols = [np.asarray(c) for c in columns]
    n = cols[0].size if cols else 0
    if any(c.size != n for c in cols):
        raise ValueError("columns differ in length")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for i in range(n):
            wr.writerow([format_value(c[i]) for c in cols])
    return path


def read_series(path) -> dict:
    """Columns of a CSV as float64 arrays (``t`` as int64), keyed by header name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        if name == "t":
            out[name] = np.array([int(v) for v in vals], dtype=np.int64)
        else:
            out[name] = np.array([float(v) for v in vals], dtype=np.float64)
    return out


def _table(obj):
    if isinstance(obj, EnsembleResult):
        return ["t", "var_p", "stderr"], [np.asarray(obj.times, dtype=np.int64), obj.mean, obj.stderr]
    if isinstance(obj, PredictionSeries):
        return (["t", "var_p", "localized_term", "noise_floor", "memory_terms"],
                [obj.t, obj.var_p, obj.localized_term, obj.noise_floor, obj.memory_terms])
    if isinstance(obj, RenewalTables):
        return ["t", "f", "Nbar", "D1"], [np.arange(obj.T + 1), obj.f, obj.Nbar, obj.D1]
    if isinstance(obj, tuple) and len(obj) == 2 and isinstance(obj[0], (list, tuple)):
        header, cols = obj
        return list(header), list(cols)
    raise TypeError(f"cannot emit {type(obj).__name__}")


def emit_series(obj, path, manifest: RunManifest | None = None) -> list:
    """Write ``obj`` as CSV plus a sidecar manifest; returns the written paths.

    ``obj`` is an :class:`EnsembleResult`, :class:`PredictionSeries`,
    :class:`RenewalTables` or a ``(header, columns)`` pair.
    """
    header, cols = _table(obj)
    path = write_csv(path, header, cols)
    man = manifest if manifest is not None else RunManifest(config_hash="", base_seed=None)
    man.outputs = [path.name]
    man.finish()
    return [path, man.write(manifest_path(path))]


def _cell_name(alpha, kappa) -> str:
    return f"cell_alpha{format_value(alpha)}_kappa{format_value(kappa)}.csv"


def emit_grid(results: list, directory, manifests: list | None = None) -> list:
    """One CSV per ``(alpha, kappa)`` cell plus ``combined.csv`` in long format."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    long_cols = [[] for _ in range(5)]
    for i, res in enumerate(results):
        cfg = res.config
        man = manifests[i] if manifests else None
        written += emit_series(res, directory / _cell_name(cfg.alpha, cfg.kappa), man)
        n = len(res.times)
        for col, vals in zip(long_cols, ([cfg.alpha] * n, [cfg.kappa] * n, res.times, res.mean, res.stderr)):
            col.extend(vals)
    header = ["alpha", "kappa", "t", "var_p", "stderr"]
    cols = [np.array(long_cols[0], dtype=np.float64), np.array(long_cols[1], dtype=np.float64),
            np.array(long_cols[2], dtype=np.int64), np.array(long_cols[3]), np.array(long_cols[4])]
    combined = RunManifest(config_hash="", base_seed=None,
                           extra={"cells": [m.config_hash for m in manifests] if manifests else []})
    written += emit_series((header, cols), directory / "combined.csv", combined)
    return written
