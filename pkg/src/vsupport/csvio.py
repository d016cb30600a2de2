"""CSV output with '#' metadata lines, and the matching reader.

Files are written to a temporary sibling and renamed, so a failed run
never leaves a partial file behind.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

CONVENTION = "magnitudes are peak phase-to-neutral values (V, A); angles in degrees; time in s"


def format_value(v) -> str:
    if isinstance(v, str):
        return v
    return f"{float(v):.12g}"


def render_csv(columns, rows, comments=()) -> str:
    buf = io.StringIO()
    for c in (CONVENTION, *comments):
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_text_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, columns, rows, comments=()) -> Path:
    return write_text_atomic(path, render_csv(columns, rows, comments))


def read_csv(path):
    """Return (comments, columns, data) with ``data`` a float array (n_rows, n_cols)."""
    comments, lines = [], []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line[1:].strip())
            elif line.strip():
                lines.append(line)
    if not lines:
        raise ValueError(f"{path}: no header row")
    reader = csv.reader(lines)
    columns = tuple(next(reader))
    rows = [[float(v) for v in r] for r in reader]
    for k, r in enumerate(rows):
        if len(r) != len(columns):
            raise ValueError(f"{path}: row {k + 1} has {len(r)} fields, expected {len(columns)}")
    data = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    return comments, columns, data


def comment_value(comments, key: str) -> str | None:
    """Value of a ``key = value`` metadata line, if present."""
    for c in comments:
        k, sep, v = c.partition("=")
        if sep and k.strip() == key:
            return v.strip()
    return None
