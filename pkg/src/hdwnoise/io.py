"""Reading and writing data panels as CSV or JSON.

Files hold one matrix.  With ``rows-are-time`` each row is an observation
and each column a coordinate; ``columns-are-time`` is the transpose.
Complex cells are written as "re+imi" (for example "1.5-0.25i").
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import TimeSeriesMatrix
from .errors import ParseError

ORIENTATIONS = ("rows-are-time", "columns-are-time")
DIGITS = 15


def _finite(v, text, row, column):
    if not np.isfinite(v):
        raise ParseError(f"non-finite cell {text!r}", row, column)
    return v


def parse_cell(text, row: int | None = None, column: int | None = None):
    """Number from a CSV/JSON cell; strings ending in i or j are complex."""
    if isinstance(text, bool):
        raise ParseError(f"boolean cell {text!r}", row, column)
    if isinstance(text, (int, float)):
        return _finite(float(text), text, row, column)
    if not isinstance(text, str):
        raise ParseError(f"non-numeric cell {text!r}", row, column)
    s = text.strip()
    if not s:
        raise ParseError("empty cell", row, column)
    try:
        return _finite(float(s), text, row, column)
    except ValueError as e:
        if isinstance(e, ParseError):
            raise
    if s[-1] in "iIjJ":
        try:
            return _finite(complex(s[:-1].replace(" ", "") + "j"), text, row, column)
        except ValueError as e:
            if isinstance(e, ParseError):
                raise
    raise ParseError(f"non-numeric cell {text!r}", row, column)


def _is_number(cell) -> bool:
    # nan and inf count as numbers here so they are reported, not taken as a header
    try:
        parse_cell(cell)
    except ParseError as e:
        return str(e).startswith("non-finite")
    return True


def _is_numeric_row(cells) -> bool:
    return all(_is_number(c) for c in cells)


def _to_matrix(rows: list[list], first_row: int) -> np.ndarray:
    if not rows:
        raise ParseError("no data rows", first_row)
    width = len(rows[0])
    if width == 0:
        raise ParseError("empty row", first_row)
    values = []
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ParseError(f"ragged row: expected {width} cells, found {len(r)}", first_row + i)
        values.append([parse_cell(c, first_row + i, j + 1) for j, c in enumerate(r)])
    if any(isinstance(v, complex) for r in values for v in r):
        return np.array(values, dtype=np.complex128)
    return np.array(values, dtype=np.float64)


def read_matrix(path) -> tuple[np.ndarray, list[str] | None]:
    """Raw matrix as stored in the file, plus the header if one was detected."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"file not found: {path}")
    text = path.read_text()
    if not text.strip():
        raise ParseError(f"empty file: {path}")
    if path.suffix.lower() == ".json" or text.lstrip().startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", e.lineno, e.colno) from None
        if isinstance(data, dict) and "data" in data:
            data = data["data"]
        if not isinstance(data, list) or not all(isinstance(r, list) for r in data):
            raise ParseError("JSON input must be an array of arrays")
        return _to_matrix(data, 1), None
    rows = [r for r in csv.reader(text.splitlines()) if any(c.strip() for c in r)]
    header = None
    if rows and not _is_numeric_row(rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first = 2
    else:
        first = 1
    return _to_matrix(rows, first), header


def ingest(path, orientation: str = "rows-are-time") -> TimeSeriesMatrix:
    if orientation not in ORIENTATIONS:
        raise ParseError(f"orientation must be one of {ORIENTATIONS}")
    M, _ = read_matrix(path)
    return TimeSeriesMatrix(M.T if orientation == "rows-are-time" else M)


def format_cell(v) -> str:
    if isinstance(v, complex) or np.iscomplexobj(v):
        v = complex(v)
        return f"{v.real:.{DIGITS}g}{v.imag:+.{DIGITS}g}i"
    return f"{float(v):.{DIGITS}g}"


def emit(x, path, orientation: str = "rows-are-time", header: bool = False) -> None:
    """Write a panel as CSV (or JSON for a .json path) with 15 significant digits."""
    if orientation not in ORIENTATIONS:
        raise ParseError(f"orientation must be one of {ORIENTATIONS}")
    X = x.data if isinstance(x, TimeSeriesMatrix) else np.atleast_2d(np.asarray(x))
    M = X.T if orientation == "rows-are-time" else X
    path = Path(path)
    cells = [[format_cell(v) for v in row] for row in M]
    if path.suffix.lower() == ".json":
        if np.iscomplexobj(M):
            payload = cells
        else:
            payload = [[float(c) for c in row] for row in cells]
        path.write_text(json.dumps(payload))
        return
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow([f"x{j + 1}" for j in range(M.shape[1])])
        w.writerows(cells)


def load_sigma(path) -> np.ndarray:
    """Square covariance matrix from CSV/JSON."""
    M, _ = read_matrix(path)
    if M.shape[0] != M.shape[1]:
        raise ParseError(f"Sigma0 must be square, got shape {M.shape}")
    return M
