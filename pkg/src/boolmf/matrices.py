"""Dense binary and real matrices, the Boolean product, and reconstruction error.

Binary matrices are immutable and expose bit-packed views of their rows and
columns as Python integers, so that solvers can do coverage arithmetic with
word-level AND/OR and popcount.  The numpy uint8 array view backs all
vectorized arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _pack_bits(vec: np.ndarray) -> int:
    """Pack a 0/1 vector into a Python int, bit k = vec[k]."""
    return int.from_bytes(np.packbits(vec, bitorder="little").tobytes(), "little")


def _unpack_bits(mask: int, length: int) -> np.ndarray:
    """Inverse of _pack_bits, returns a uint8 vector of the given length."""
    nbytes = (length + 7) // 8
    raw = np.frombuffer(mask.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:length]


class BinaryMatrix:
    """Immutable dense {0,1} matrix.

    Parameters
    ----------
    values : array_like
        2-D array of 0/1 entries, at least 1x1.
    """

    __slots__ = ("_arr", "_row_masks", "_col_masks")

    def __init__(self, values):
        arr = np.ascontiguousarray(values, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError("binary matrix must be 2-D, got ndim=%d" % arr.ndim)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("binary matrix must be at least 1x1, got %s" % (arr.shape,))
        if arr.max(initial=0) > 1:
            raise ValueError("binary matrix entries must be 0 or 1")
        arr.setflags(write=False)
        self._arr = arr
        self._row_masks = None
        self._col_masks = None

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BinaryMatrix":
        return cls(np.zeros((rows, cols), dtype=np.uint8))

    @classmethod
    def identity(cls, n: int) -> "BinaryMatrix":
        return cls(np.eye(n, dtype=np.uint8))

    @classmethod
    def from_columns(cls, columns) -> "BinaryMatrix":
        """Build a matrix whose columns are the given 0/1 vectors."""
        return cls(np.stack([np.asarray(c, dtype=np.uint8) for c in columns], axis=1))

    @property
    def rows(self) -> int:
        return self._arr.shape[0]

    @property
    def cols(self) -> int:
        return self._arr.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._arr.shape

    def to_array(self) -> np.ndarray:
        """Read-only uint8 view of the entries."""
        return self._arr

    def row_masks(self) -> list[int]:
        """Per-row bitsets; bit j of row_masks()[i] is entry (i, j)."""
        if self._row_masks is None:
            self._row_masks = [_pack_bits(r) for r in self._arr]
        return self._row_masks

    def col_masks(self) -> list[int]:
        """Per-column bitsets; bit i of col_masks()[j] is entry (i, j)."""
        if self._col_masks is None:
            self._col_masks = [_pack_bits(c) for c in self._arr.T]
        return self._col_masks

    def transpose(self) -> "BinaryMatrix":
        return BinaryMatrix(self._arr.T)

    @property
    def T(self) -> "BinaryMatrix":
        return self.transpose()

    def count_ones(self) -> int:
        return int(np.count_nonzero(self._arr))

    def column(self, j: int) -> np.ndarray:
        return self._arr[:, j]

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._arr, other._arr))

    def __hash__(self) -> int:
        return hash((self.shape, self._arr.tobytes()))

    def __repr__(self) -> str:
        return "BinaryMatrix(%dx%d, %d ones)" % (self.rows, self.cols, self.count_ones())


class RealMatrix:
    """Immutable dense nonnegative real matrix.

    Entries must be >= 0.  Callers that use one as a factorization input are
    responsible for the additional <= 1 restriction (the loader and the
    solvers enforce it).
    """

    __slots__ = ("_arr",)

    def __init__(self, values):
        arr = np.ascontiguousarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("real matrix must be 2-D, got ndim=%d" % arr.ndim)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("real matrix must be at least 1x1, got %s" % (arr.shape,))
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("real matrix entries must be finite and >= 0")
        arr.setflags(write=False)
        self._arr = arr

    @property
    def rows(self) -> int:
        return self._arr.shape[0]

    @property
    def cols(self) -> int:
        return self._arr.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._arr.shape

    def to_array(self) -> np.ndarray:
        return self._arr

    def transpose(self) -> "RealMatrix":
        return RealMatrix(self._arr.T)

    @property
    def T(self) -> "RealMatrix":
        return self.transpose()

    def max_entry(self) -> float:
        return float(self._arr.max())

    def column(self, j: int) -> np.ndarray:
        return self._arr[:, j]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RealMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._arr, other._arr))

    def __repr__(self) -> str:
        return "RealMatrix(%dx%d)" % self.shape


Matrix = BinaryMatrix | RealMatrix


def boolean_product(W: BinaryMatrix, H: BinaryMatrix) -> BinaryMatrix:
    """Boolean matrix product: OR over k of (W[i,k] AND H[k,j]).

    Equals the entrywise min(1, WH) under ordinary integer arithmetic.

    Raises
    ------
    ValueError
        If W.cols != H.rows.
    """
    if W.cols != H.rows:
        raise ValueError(
            "inner dimensions do not match: %dx%d times %dx%d"
            % (W.rows, W.cols, H.rows, H.cols)
        )
    counts = W.to_array().astype(np.int64) @ H.to_array().astype(np.int64)
    return BinaryMatrix((counts > 0).astype(np.uint8))


def reconstruction_error(X: Matrix, W: BinaryMatrix, H: BinaryMatrix) -> int | float:
    """Squared Frobenius distance between X and min(1, WH).

    For binary X this is the number of disagreeing entries and is returned
    as an exact int; for real X it is a float.
    """
    if X.shape != (W.rows, H.cols):
        raise ValueError(
            "target is %dx%d but factors produce %dx%d"
            % (X.rows, X.cols, W.rows, H.cols)
        )
    Z = boolean_product(W, H)
    if isinstance(X, BinaryMatrix):
        return int(np.count_nonzero(X.to_array() != Z.to_array()))
    diff = X.to_array() - Z.to_array()
    return float(np.dot(diff.ravel(), diff.ravel()))


@dataclass(frozen=True)
class FactorMeta:
    """Provenance of a factorization: how it was initialized and fit."""

    init_strategy: str = ""
    seed: int = 0
    ao_iterations: int = 0
    wall_time: float = 0.0


@dataclass(frozen=True)
class Factorization:
    """A (W, H) pair with its rank and reconstruction error for a fixed input.

    Build instances through :meth:`fitted`, which computes the error against
    the input the pair was fit to.
    """

    W: BinaryMatrix
    H: BinaryMatrix
    rank: int
    error: int | float
    meta: FactorMeta = field(default_factory=FactorMeta)

    def __post_init__(self):
        if self.W.cols != self.rank or self.H.rows != self.rank:
            raise ValueError(
                "rank %d does not match factor shapes %s, %s"
                % (self.rank, self.W.shape, self.H.shape)
            )

    @classmethod
    def fitted(cls, X: Matrix, W: BinaryMatrix, H: BinaryMatrix,
               meta: FactorMeta | None = None) -> "Factorization":
        error = reconstruction_error(X, W, H)
        return cls(W=W, H=H, rank=W.cols, error=error, meta=meta or FactorMeta())

    def reconstruction(self) -> BinaryMatrix:
        return boolean_product(self.W, self.H)
