"""Plot-ready text tables and JSON metadata sidecars.

Tables are delimiter-separated text: one header row of column names with
units in brackets, then one row per sample. Floats use ``%.12e`` so that
identical runs give byte-identical files. Sidecars are indented JSON with
sorted keys.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np


def _cell(value) -> str:
    if isinstance(value, str):
        return value if value else "-"
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return "%.12e" % v


def format_table(columns, rows, delimiter: str = "\t") -> str:
    """Header plus rows; ``rows`` is a 2D array or a list of sequences."""
    columns = list(columns)
    lines = [delimiter.join(columns)]
    for row in rows:
        row = list(row)
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells for {len(columns)} columns")
        lines.append(delimiter.join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def read_table(path, delimiter: str = "\t") -> tuple[list[str], list[list[str]]]:
    """Header and raw string cells of a table written by :func:`format_table`."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(delimiter)
    return header, [line.split(delimiter) for line in lines[1:]]


def read_numeric(path, delimiter: str = "\t") -> tuple[list[str], np.ndarray]:
    header, rows = read_table(path, delimiter)
    return header, np.array([[float(c) for c in row] for row in rows], dtype=float).reshape(len(rows), len(header))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def format_json(data) -> str:
    return json.dumps(_jsonable(data), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


class OutputSet:
    """Files collected in memory and written together once a run succeeds."""

    def __init__(self):
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        if name in self.files:
            raise ValueError(f"duplicate output {name!r}")
        self.files[name] = text

    def commit(self, directory) -> list[Path]:
        """Write every file via a temporary name; on failure remove what was written."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written: list[Path] = []
        try:
            for name, text in self.files.items():
                path = directory / name
                tmp = path.with_name(path.name + ".part")
                tmp.write_text(text)
                os.replace(tmp, path)
                written.append(path)
        except OSError:
            for path in written:
                path.unlink(missing_ok=True)
            for name in self.files:
                (directory / (name + ".part")).unlink(missing_ok=True)
            raise
        return written
