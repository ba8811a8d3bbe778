"""Deterministic CSV and JSON writers for estimates and reports.

Numbers are serialised with ``repr`` so files round-trip bit-exactly and
identical runs produce byte-identical outputs. Timing information goes
into a separate manifest file that is excluded from reproducibility
comparisons.
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Mapping, Sequence

import numpy as np

from .phase import GapEstimate

SCHEMA_VERSION = 1

ESTIMATE_COLUMNS = ("beta", "lambda", "k", "method", "value", "stderr",
                    "n_samples", "seed", "dt")
ORACLE_COLUMNS = ("oracle", "beta", "lambda", "k", "n_or_order", "value",
                  "stderr_or_tol", "seed")
POINT_COLUMNS = ("sample_id", "point_location")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    return str(value)


def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_estimates_csv(path, estimates: Sequence[GapEstimate]) -> None:
    rows = [
        (e.beta, e.lam, e.k, e.method, e.value, e.stderr, e.n_samples, e.seed, e.dt)
        for e in estimates
    ]
    _write_csv(path, ESTIMATE_COLUMNS, rows)


def write_points_csv(path, configurations: Sequence[np.ndarray]) -> None:
    """One row per point, tagged with the index of its configuration."""
    rows = []
    for sid, pts in enumerate(configurations):
        for p in np.asarray(pts, dtype=float):
            rows.append((sid, p))
    _write_csv(path, POINT_COLUMNS, rows)


def write_oracle_csv(path, rows: Sequence[Mapping]) -> None:
    _write_csv(path, ORACLE_COLUMNS,
               [tuple(r.get(c) for c in ORACLE_COLUMNS) for r in rows])


def _jsonable(value):
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON-serialisable: {type(value)!r}")


def write_json(path, payload: Mapping) -> None:
    """Schema-versioned, key-sorted JSON (deterministic byte stream)."""
    body = dict(payload)
    body.setdefault("schema_version", SCHEMA_VERSION)
    with open(path, "w") as fh:
        json.dump(body, fh, sort_keys=True, indent=1, default=_jsonable)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_manifest(path, entries: Mapping) -> None:
    """Run manifest (wall time, core counts, budgets); not reproducible."""
    with open(path, "w") as fh:
        json.dump(dict(entries), fh, sort_keys=True, indent=1)
        fh.write("\n")


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
