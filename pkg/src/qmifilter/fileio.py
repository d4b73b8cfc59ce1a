"""Plain-text formats: matrix CSV with a shape header, and flat dotted-key config files.

Matrix CSV: first line ``rows,cols``, then one comma-separated line per row
with every value written as ``%.17g`` so a round trip is exact.

Config grammar, one entry per line::

    # comment
    section.key = <python literal>

Values are parsed with :func:`ast.literal_eval` (numbers, strings, lists,
tuples, dicts, booleans); anything that does not parse is kept as a bare
string. Keys are case sensitive; later lines override earlier ones.
"""

from __future__ import annotations

import ast
import os
from pathlib import Path

import numpy as np

from .errors import QmiError


class FormatError(QmiError):
    pass


def format_matrix(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    lines = [f"{M.shape[0]},{M.shape[1]}"]
    lines += [",".join(f"{v:.17g}" for v in row) for row in M]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty matrix file")
    try:
        rows, cols = (int(v) for v in lines[0].split(","))
    except ValueError as exc:
        raise FormatError(f"bad shape header {lines[0]!r}") from exc
    data = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    if cols == 0:
        data = []
    if len(data) != (rows if cols else 0) or any(len(r) != cols for r in data):
        raise FormatError(f"matrix body does not match header {rows}x{cols}")
    return np.array(data, dtype=float).reshape(rows, cols)


def write_text(path, text: str) -> None:
    """Write via a temporary file and rename, so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_matrix(path, M) -> None:
    write_text(path, format_matrix(M))


def read_matrix(path) -> np.ndarray:
    return parse_matrix(Path(path).read_text())


def parse_config(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise FormatError(f"line {lineno}: empty key")
        try:
            out[key] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            out[key] = value
    return out


def format_config(entries: dict) -> str:
    return "".join(f"{k} = {v!r}\n" for k, v in entries.items())


def read_config(path) -> dict:
    return parse_config(Path(path).read_text())
