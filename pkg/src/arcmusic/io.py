"""Plain-text and PGM output formats, all written atomically."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError


def atomic_write(path, data) -> Path:
    """Write ``data`` (str or bytes) to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(x: float) -> str:
    return repr(float(x))


def format_complex_matrix(matrix, header=None) -> str:
    """Rows = observation index, columns = incident index, entries ``re,im``."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    lines = [f"# {key}: {value}" for key, value in (header or {}).items()]
    lines.append(f"# shape: {m.shape[0]} {m.shape[1]}")
    for row in m:
        lines.append(" ".join(f"{_fmt(z.real)},{_fmt(z.imag)}" for z in row))
    return "\n".join(lines) + "\n"


def parse_complex_matrix(text: str):
    """Inverse of :func:`format_complex_matrix`; returns ``(matrix, header)``."""
    header, rows = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if sep:
                header[key.strip()] = value.strip()
            continue
        try:
            row = [complex(float(re), float(im))
                   for re, im in (tok.split(",") for tok in line.split())]
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: malformed complex entry") from exc
        rows.append(row)
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError("matrix file has no rows or ragged rows")
    m = np.array(rows, dtype=complex)
    if "shape" in header and tuple(int(v) for v in header["shape"].split()) != m.shape:
        raise ConfigError("matrix shape does not match its header")
    header.pop("shape", None)
    return m, header


def save_complex_matrix(path, matrix, header=None) -> Path:
    return atomic_write(path, format_complex_matrix(matrix, header))


def load_complex_matrix(path):
    return parse_complex_matrix(Path(path).read_text())


def format_singular_values(singular_values, rank: int) -> str:
    s = np.asarray(singular_values, dtype=float)
    lines = ["m,sigma,sigma_over_sigma1,selected"]
    for m, sigma in enumerate(s, 1):
        lines.append(f"{m},{_fmt(sigma)},{_fmt(sigma / s[0])},{int(m <= rank)}")
    return "\n".join(lines) + "\n"


def format_map_csv(imaging_map) -> str:
    """Header ``x,y,value``; x outer, y inner (row-major over ``values[i, j]``)."""
    grid = imaging_map.grid
    xs, ys = grid.xs, grid.ys
    lines = ["x,y,value"]
    for i, x in enumerate(xs):
        col = imaging_map.values[i]
        lines.extend(f"{_fmt(x)},{_fmt(y)},{_fmt(v)}" for y, v in zip(ys, col))
    return "\n".join(lines) + "\n"


def pgm_bytes(imaging_map):
    """8-bit P5 image, top row at ``y_max``, linear from [1, max] to [0, 255].

    Returns ``(payload, (low, high))``.
    """
    v = np.asarray(imaging_map.values, dtype=float)
    low, high = 1.0, float(np.max(v))
    span = high - low
    if span > 0:
        scaled = np.clip((v - low) / span, 0.0, 1.0) * 255.0
    else:
        scaled = np.zeros_like(v)
    pixels = np.rint(scaled).astype(np.uint8)
    image = pixels[:, ::-1].T  # rows = y descending, columns = x ascending
    nx, ny = v.shape
    head = f"P5\n{nx} {ny}\n255\n".encode("ascii")
    return head + image.tobytes(), (low, high)


def format_manifest(entries) -> str:
    """``key: value`` lines in insertion order."""
    return "".join(f"{key}: {value}\n" for key, value in entries.items())


def parse_key_values(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        out[key.strip()] = value.strip()
    return out
