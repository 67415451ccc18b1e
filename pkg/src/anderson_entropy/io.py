"""Reading and writing run artifacts.

Files in a run directory:

``records.csv``
    One row per realization and subsystem size. Columns: ``realization``,
    ``seed``, ``l``, ``S``, ``L``, ``U``, ``U_tight``, ``U_peierls``, the
    boundary terms (``L_plus``, ``L_minus``, ``R_plus``, ``R_minus``,
    ``Lcal_plus``, ``Lcal_minus``, ``Ucal_plus``, ``Ucal_minus``; ``nan`` when
    not defined) and ``renyi_<alpha>``. Floats use ``repr`` so values survive
    a round trip bit for bit.
``stats.json``
    ``{"schema": "anderson-entropy/stats", "schema_version": 1, "config": ...,
    "stats": ...}``.
``hist_<quantity>_l<l>.csv``
    ``bin_left, bin_right, density``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .ensemble import BOUNDARY_KEYS, ENTROPY_KEYS, Density
from .errors import ConfigError

__all__ = [
    "STATS_SCHEMA",
    "STATS_SCHEMA_VERSION",
    "record_columns",
    "write_records_csv",
    "write_records_json",
    "read_records_csv",
    "write_stats_json",
    "read_stats_json",
    "write_histogram_csv",
    "read_histogram_csv",
    "to_jsonable",
]

STATS_SCHEMA = "anderson-entropy/stats"
STATS_SCHEMA_VERSION = 1


def record_columns(renyi_alphas) -> list[str]:
    return (["realization", "seed", "l", *ENTROPY_KEYS, *BOUNDARY_KEYS]
            + [f"renyi_{a:g}" for a in renyi_alphas])


def _rows(records, columns):
    for rec in sorted(records, key=lambda r: r.index):
        for l, vals in rec.values.items():
            row = {"realization": rec.index, "seed": rec.seed, "l": l}
            for col in columns[3:]:
                row[col] = vals.get(col, math.nan)
            yield row


def write_records_csv(path, records, renyi_alphas) -> Path:
    path = Path(path)
    columns = record_columns(renyi_alphas)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in _rows(records, columns):
            writer.writerow([repr(float(row[c])) if c not in ("realization", "seed", "l") else row[c]
                             for c in columns])
    return path


def write_records_json(path, records, renyi_alphas) -> Path:
    path = Path(path)
    columns = record_columns(renyi_alphas)
    rows = [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
            for row in _rows(records, columns)]
    path.write_text(json.dumps({"columns": columns, "rows": rows}, indent=1) + "\n")
    return path


def read_records_csv(path) -> dict[str, np.ndarray]:
    """Columns of a records file as arrays (integers for index columns)."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = list(reader)
    out = {}
    for i, name in enumerate(header):
        col = [row[i] for row in data]
        if name in ("realization", "seed", "l"):
            out[name] = np.array([int(v) for v in col], dtype=np.uint64 if name == "seed" else np.int64)
        else:
            out[name] = np.array([float(v) for v in col])
    return out


def to_jsonable(obj):
    """Replace numpy scalars/arrays and non-finite floats with JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_stats_json(path, config: dict, stats: dict) -> Path:
    path = Path(path)
    doc = {
        "schema": STATS_SCHEMA,
        "schema_version": STATS_SCHEMA_VERSION,
        "config": to_jsonable(config),
        "stats": to_jsonable(stats),
    }
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return path


def read_stats_json(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != STATS_SCHEMA:
        raise ConfigError(f"{path}: not an ensemble stats document")
    if doc.get("schema_version") != STATS_SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: schema version {doc.get('schema_version')} is not supported "
            f"(expected {STATS_SCHEMA_VERSION})"
        )
    return doc


def write_histogram_csv(path, density: Density) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_left", "bin_right", "density"])
        for lo, hi, p in zip(density.edges[:-1], density.edges[1:], density.density):
            writer.writerow([repr(float(lo)), repr(float(hi)), repr(float(p))])
    return path


def read_histogram_csv(path) -> Density:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [[float(v) for v in row] for row in reader]
    arr = np.array(rows)
    edges = np.append(arr[:, 0], arr[-1, 1])
    density = arr[:, 2]
    counts = density * np.diff(edges)
    return Density(edges, counts, density)
