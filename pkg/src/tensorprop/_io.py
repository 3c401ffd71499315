"""Small file helpers: atomic writes and the 17-digit float convention."""

import os
import tempfile
from pathlib import Path

import numpy as np


def fmt_float(x):
    # 17 significant digits round-trips every IEEE double
    return format(float(x), ".17g")


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temp file in the same directory + rename."""
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


def parse_header(lines):
    """Split ``#key value`` header lines from body lines.

    Returns ``(headers, body)`` where ``headers`` is a list of
    ``(key, value)`` pairs in file order and ``body`` the remaining
    non-empty lines.
    """
    headers = []
    body = []
    for raw in lines:
        line = raw.rstrip("\n").rstrip("\r")
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(" ")
            headers.append((key, value))
        else:
            body.append(line)
    return headers, body


def matrix_lines(arr):
    return [",".join(fmt_float(x) for x in row) for row in arr]


def read_matrix(lines, pos, rows, cols):
    """Parse ``rows`` comma-separated lines starting at ``lines[pos]``."""
    out = np.empty((rows, cols), dtype=np.float64)
    for i in range(rows):
        parts = lines[pos + i].split(",")
        if len(parts) != cols:
            raise ValueError(f"line {pos + i}: expected {cols} values, got {len(parts)}")
        out[i] = [float(p) for p in parts]
    return out, pos + rows


def tensor_header_lines(shape, index_map):
    lines = [
        "#shape " + ",".join(str(d) for d in shape.dims),
        "#kinds " + ",".join(shape.mode_kinds),
    ]
    if index_map is not None:
        for n, labs in enumerate(index_map.labels):
            lines.append(f"#labels mode={n}: " + ",".join(labs))
    return lines
