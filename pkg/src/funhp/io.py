"""File formats: curve and coefficient CSVs, smoothing-parameter files, JSON, INI configs."""

from __future__ import annotations

import configparser
import csv
import json
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


class InputError(ValueError):
    """Malformed user input; the CLI maps it to exit code 2."""


def _parse_row(row, lineno, path):
    out = []
    for col, cell in enumerate(row):
        try:
            value = float(cell)
        except ValueError:
            raise InputError(f"{path}: row {lineno}, column {col + 1}: cannot parse {cell!r} as a number") from None
        if not np.isfinite(value):
            raise InputError(f"{path}: row {lineno}, column {col + 1}: non-finite value {cell!r}")
        out.append(value)
    return out


def read_table(path) -> list[list[float]]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            rows.append(_parse_row(row, lineno, path))
    if not rows:
        raise InputError(f"{path}: no data rows")
    width = len(rows[0])
    for k, row in enumerate(rows):
        if len(row) != width:
            raise InputError(f"{path}: row {k + 1} has {len(row)} columns, expected {width}")
    return rows


def read_curves(path, grid: str = "header") -> tuple[np.ndarray, np.ndarray]:
    """Read a curve file.

    With ``grid="header"`` the first row holds the sample points ``t``; with
    ``grid="uniform"`` every row is data and the grid is ``linspace(0, 1, m)``.
    Returns ``(grid, values)`` with ``values`` of shape ``(n, m)``.
    """
    rows = np.array(read_table(path))
    if grid == "header":
        if rows.shape[0] < 2:
            raise InputError(f"{path}: header grid row present but no curves")
        t, values = rows[0], rows[1:]
    elif grid == "uniform":
        values = rows
        t = np.linspace(0.0, 1.0, rows.shape[1])
    else:
        raise InputError(f"unknown grid mode {grid!r} (expected 'header' or 'uniform')")
    return t, values


def write_matrix(path, values, header=None) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    with Path(path).open("w", newline="") as fh:
        if header is not None:
            np.savetxt(fh, np.atleast_2d(header), fmt=FLOAT_FMT, delimiter=",")
        np.savetxt(fh, values, fmt=FLOAT_FMT, delimiter=",")


def write_rows(path, fieldnames, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (FLOAT_FMT % v if isinstance(v, float) else v) for k, v in row.items()})


def read_alpha(path) -> np.ndarray:
    """Smoothing parameters, one per basis component, from a CSV (any layout)."""
    values = np.array([v for row in read_table(path) for v in row])
    bad = np.nonzero(values < 0)[0]
    if bad.size:
        raise InputError(
            f"{path}: smoothing parameter {bad[0] + 1} is {values[bad[0]]}; "
            "the positivity condition <h, Bh> >= 0 requires nonnegative values"
        )
    return values


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, default=_jsonable, allow_nan=True) + "\n")


def read_config(path) -> configparser.ConfigParser:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise InputError(f"{path}: {exc}") from None
    return parser


def parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise InputError(f"cannot parse {text!r} as a list of numbers") from None


def parse_ints(text: str) -> list[int]:
    try:
        return [int(float(v)) for v in text.replace(",", " ").split()]
    except ValueError:
        raise InputError(f"cannot parse {text!r} as a list of integers") from None
