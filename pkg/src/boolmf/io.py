"""File formats: the shared matrix text format and PGM feature export.

Matrix files carry a ``m n`` header line followed by m rows of n
space-separated values.  Files whose values are all exactly 0 or 1 load as
:class:`BinaryMatrix`; any other value in [0, 1] makes the file real-valued;
values outside [0, 1] are rejected.  All writes are atomic
(write-to-temp-then-rename).
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from .matrices import BinaryMatrix, Matrix, RealMatrix


class MatrixFormatError(ValueError):
    """Parse failure with 1-based line and token-column coordinates."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__("%s (line %d, column %d)" % (message, line, column))
        self.line = line
        self.column = column


def load_matrix(path) -> Matrix:
    """Read a matrix file, returning a BinaryMatrix or RealMatrix.

    Raises
    ------
    MatrixFormatError
        On a malformed header, a non-numeric token, a wrong row/column
        count, or a value outside [0, 1]; the error carries the offending
        line and column.
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise MatrixFormatError("missing 'rows cols' header", 1, 1)
    header = lines[0].split()
    if len(header) != 2:
        raise MatrixFormatError("header must be two integers 'rows cols'", 1, len(header))
    dims = []
    for col, tok in enumerate(header, start=1):
        try:
            dims.append(int(tok))
        except ValueError:
            raise MatrixFormatError("non-integer dimension %r" % tok, 1, col) from None
    m, n = dims
    if m < 1 or n < 1:
        raise MatrixFormatError("dimensions must be >= 1", 1, 1)

    values = np.empty((m, n), dtype=np.float64)
    row = 0
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens:
            continue  # blank lines between/after rows are tolerated
        if row >= m:
            raise MatrixFormatError("more than %d data rows" % m, lineno, 1)
        if len(tokens) != n:
            raise MatrixFormatError(
                "expected %d values, found %d" % (n, len(tokens)), lineno, len(tokens)
            )
        for col, tok in enumerate(tokens, start=1):
            try:
                v = float(tok)
            except ValueError:
                raise MatrixFormatError("non-numeric value %r" % tok, lineno, col) from None
            if math.isnan(v) or v < 0.0 or v > 1.0:
                raise MatrixFormatError("value %s outside [0, 1]" % tok, lineno, col)
            values[row, col - 1] = v
        row += 1
    if row != m:
        raise MatrixFormatError("expected %d data rows, found %d" % (m, row), len(lines), 1)
    if np.all((values == 0.0) | (values == 1.0)):
        return BinaryMatrix(values.astype(np.uint8))
    return RealMatrix(values)


def _atomic_write_bytes(path, payload: bytes):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp.%d" % os.getpid())
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def atomic_write_text(path, text: str):
    _atomic_write_bytes(path, text.encode())


def save_matrix(M: Matrix, path):
    """Write a matrix in the text format; loading it back is bit-exact."""
    lines = ["%d %d" % M.shape]
    if isinstance(M, BinaryMatrix):
        for row in M.to_array():
            lines.append(" ".join("%d" % v for v in row))
    else:
        for row in M.to_array():
            lines.append(" ".join(repr(float(v)) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def export_features(W: BinaryMatrix, tile_shape: tuple[int, int], path,
                    binary_format: bool = False):
    """Render each column of W as a tile in one PGM image grid.

    Each column is reshaped row-major to ``tile_shape`` and drawn
    black/white (1 -> 255); tiles are laid out in a near-square grid with
    one-pixel gray separators.  ``binary_format`` selects P5 over the
    ASCII P2 encoding.
    """
    h, w = tile_shape
    if h < 1 or w < 1 or h * w != W.rows:
        raise ValueError(
            "tile shape %dx%d does not match %d rows" % (h, w, W.rows)
        )
    r = W.cols
    grid_cols = math.ceil(math.sqrt(r))
    grid_rows = math.ceil(r / grid_cols)
    sep = 128
    canvas = np.full(
        (grid_rows * h + grid_rows - 1, grid_cols * w + grid_cols - 1),
        sep, dtype=np.uint8,
    )
    for k in range(r):
        gi, gj = divmod(k, grid_cols)
        tile = W.to_array()[:, k].reshape(h, w) * np.uint8(255)
        canvas[gi * (h + 1):gi * (h + 1) + h, gj * (w + 1):gj * (w + 1) + w] = tile
    if binary_format:
        header = b"P5\n%d %d\n255\n" % (canvas.shape[1], canvas.shape[0])
        _atomic_write_bytes(path, header + canvas.tobytes())
    else:
        body = "\n".join(" ".join(str(v) for v in row) for row in canvas)
        atomic_write_text(path, "P2\n%d %d\n255\n%s\n" % (canvas.shape[1], canvas.shape[0], body))


def save_factorization(base, W: BinaryMatrix, H: BinaryMatrix, report: dict):
    """Write W and H matrix files plus a JSON sidecar of report fields.

    Returns the three paths written: ``base.W.txt``, ``base.H.txt`` and
    ``base.json``.
    """
    base = Path(base)
    w_path = base.with_name(base.name + ".W.txt")
    h_path = base.with_name(base.name + ".H.txt")
    j_path = base.with_name(base.name + ".json")
    save_matrix(W, w_path)
    save_matrix(H, h_path)
    sidecar = dict(report)
    sidecar["files"] = {"W": w_path.name, "H": h_path.name}
    atomic_write_text(j_path, json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return w_path, h_path, j_path
