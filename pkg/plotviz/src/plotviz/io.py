"""CSV ingestion with schema validation.

Readers return plain numpy structures and fail loudly, naming the offending
column or file, before any drawing starts.  The schemas are the ones the
backupcbf command line tool documents for its grid and trajectory artifacts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = ["GridTable", "SchemaError", "TrajectoryTable", "load_grid",
           "load_trajectory"]

GRID_COLUMNS = ("x1", "x2", "h_b", "traj_margin", "term_margin", "inside", "kernel")
TRAJECTORY_BASE_COLUMNS = ("t", "x1", "u1", "u_nom_1", "status", "h", "h_b",
                           "traj_margin", "term_margin", "iters")


class SchemaError(ValueError):
    """An input file does not match the documented CSV schema."""


def _read_rows(path) -> tuple:
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"empty file: {path}")
    header, data = rows[0], rows[1:]
    if not data:
        raise SchemaError(f"no data rows in {path}")
    width = len(header)
    for k, row in enumerate(data):
        if len(row) != width:
            raise SchemaError(f"row {k + 1} of {path} has {len(row)} fields, "
                              f"header has {width}")
    return header, data


def _require(header, needed, path) -> None:
    missing = [c for c in needed if c not in header]
    if missing:
        named = ", ".join(f"'{c}'" for c in missing)
        raise SchemaError(f"missing column {named} in {path}")


def _float_column(header, data, name) -> np.ndarray:
    j = header.index(name)
    return np.array([float(row[j]) for row in data])


def _prefixed_count(header, prefix) -> int:
    count = 0
    while f"{prefix}{count + 1}" in header:
        count += 1
    return count


@dataclass(frozen=True)
class GridTable:
    """A rectangular membership scan, axes ascending, arrays indexed [i, j]."""

    x1: np.ndarray
    x2: np.ndarray
    h_b: np.ndarray
    traj_margin: np.ndarray
    term_margin: np.ndarray
    inside: np.ndarray
    kernel: np.ndarray

    @property
    def margin(self) -> np.ndarray:
        return np.minimum(self.traj_margin, self.term_margin)


def load_grid(path) -> GridTable:
    header, data = _read_rows(path)
    _require(header, GRID_COLUMNS, path)
    x1_col = _float_column(header, data, "x1")
    x2_col = _float_column(header, data, "x2")

    # row-major lattice: the inner run length is where x1 first changes
    change = np.flatnonzero(x1_col != x1_col[0])
    n2 = int(change[0]) if change.size else x1_col.size
    if x1_col.size % n2:
        raise SchemaError(f"{x1_col.size} rows do not form a rectangular grid "
                          f"with inner length {n2} in {path}")
    n1 = x1_col.size // n2
    x1 = x1_col.reshape(n1, n2)
    x2 = x2_col.reshape(n1, n2)
    if np.any(x1 != x1[:, :1]) or np.any(x2 != x2[:1, :]):
        raise SchemaError(f"rows of {path} are not in row-major grid order")
    axis1, axis2 = x1[:, 0], x2[0]
    if np.any(np.diff(axis1) <= 0) or np.any(np.diff(axis2) <= 0):
        raise SchemaError(f"grid axes in {path} must be strictly increasing")

    def shaped(name):
        return _float_column(header, data, name).reshape(n1, n2)

    return GridTable(
        x1=axis1, x2=axis2, h_b=shaped("h_b"),
        traj_margin=shaped("traj_margin"), term_margin=shaped("term_margin"),
        inside=shaped("inside").astype(bool), kernel=shaped("kernel").astype(bool),
    )


@dataclass(frozen=True)
class TrajectoryTable:
    """One closed-loop run: per-step states, inputs, margins, parameters."""

    t: np.ndarray
    states: np.ndarray      # (rows, n)
    inputs: np.ndarray      # (rows, m)
    nominal: np.ndarray     # (rows, m)
    status: np.ndarray
    h: np.ndarray
    h_b: np.ndarray
    traj_margin: np.ndarray
    term_margin: np.ndarray
    theta: Optional[np.ndarray]   # (rows, p) when the run adapted parameters
    iters: np.ndarray


def load_trajectory(path) -> TrajectoryTable:
    header, data = _read_rows(path)
    _require(header, TRAJECTORY_BASE_COLUMNS, path)
    n = _prefixed_count(header, "x")
    m = _prefixed_count(header, "u")
    p = _prefixed_count(header, "theta_")

    def block(prefix, count):
        return np.stack([_float_column(header, data, f"{prefix}{k + 1}")
                         for k in range(count)], axis=1)

    status = np.array([row[header.index("status")] for row in data])
    return TrajectoryTable(
        t=_float_column(header, data, "t"),
        states=block("x", n), inputs=block("u", m), nominal=block("u_nom_", m),
        status=status, h=_float_column(header, data, "h"),
        h_b=_float_column(header, data, "h_b"),
        traj_margin=_float_column(header, data, "traj_margin"),
        term_margin=_float_column(header, data, "term_margin"),
        theta=block("theta_", p) if p else None,
        iters=_float_column(header, data, "iters"),
    )
