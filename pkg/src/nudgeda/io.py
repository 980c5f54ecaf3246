"""Atomic CSV/JSON writers with bit-reproducible number formatting."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_number(x) -> str:
    return FLOAT_FMT % float(x)


def write_csv(path, header: list[str], columns) -> Path:
    """Write equal-length columns under a single header row."""
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    if len({c.size for c in cols}) > 1:
        raise ValueError("CSV columns must have equal length")
    if len(header) != len(cols):
        raise ValueError("header and column count differ")
    lines = [",".join(header)]
    if cols:
        for row in zip(*cols):
            lines.append(",".join(FLOAT_FMT % v for v in row))
    _atomic_write(Path(path), "\n".join(lines) + "\n")
    return Path(path)


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path, payload) -> Path:
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default, ensure_ascii=False)
    _atomic_write(Path(path), text + "\n")
    return Path(path)


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
