"""Dense vectors and compressed sparse row matrices.

Vectors are plain one-dimensional ``float64`` numpy arrays. :class:`CsrMatrix`
stores a matrix in CSR layout with sorted, duplicate-free column indices in
every row; it is the type of the tomographic projector.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError

__all__ = [
    "as_vector",
    "CsrMatrix",
    "matvec",
    "matvec_transpose",
    "operator_norm_estimate",
    "write_matrix_market",
    "read_matrix_market",
]


def as_vector(x, n=None, name="x"):
    """Return `x` as a finite 1-D float64 array, optionally of length `n`."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Real matrix in compressed sparse row format.

    Attributes
    ----------
    n_rows, n_cols : int
        Matrix shape.
    row_offsets : ndarray of int64, shape (n_rows + 1,)
        ``row_offsets[i]:row_offsets[i+1]`` slices the entries of row ``i``.
    col_indices : ndarray of int64
        Column of each stored entry, strictly increasing within a row.
    values : ndarray of float64
        Stored entries.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        cols = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "row_offsets", offsets)
        object.__setattr__(self, "col_indices", cols)
        object.__setattr__(self, "values", vals)
        if self.n_rows < 0 or self.n_cols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        if offsets.shape != (self.n_rows + 1,) or offsets[0] != 0:
            raise ValueError("row_offsets must have length n_rows + 1 and start at 0")
        if np.any(np.diff(offsets) < 0) or offsets[-1] != vals.shape[0]:
            raise ValueError("row_offsets must be nondecreasing and end at nnz")
        if cols.shape != vals.shape:
            raise ValueError("col_indices and values must have equal length")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_cols):
            raise ValueError("column index out of range")
        if not np.all(np.isfinite(vals)):
            raise ValueError("matrix values must be finite")
        rows = self.row_ids
        if cols.size > 1:
            same_row = rows[1:] == rows[:-1]
            if np.any(same_row & (cols[1:] <= cols[:-1])):
                raise ValueError("column indices must be sorted and unique within rows")

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self):
        return int(self.values.shape[0])

    @property
    def row_ids(self):
        """Row index of every stored entry."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.row_offsets))

    @classmethod
    def from_triplets(cls, rows, cols, values, shape):
        """Build from coordinate triplets; duplicate positions are summed."""
        n_rows, n_cols = (int(s) for s in shape)
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == values.shape):
            raise DimensionError("triplet arrays must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
            raise ValueError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= n_cols):
            raise ValueError("column index out of range")
        key = rows * max(n_cols, 1) + cols
        uniq, inverse = np.unique(key, return_inverse=True)
        summed = np.zeros(uniq.shape[0])
        np.add.at(summed, inverse, values)
        u_rows = uniq // max(n_cols, 1)
        u_cols = uniq % max(n_cols, 1)
        offsets = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(u_rows, minlength=n_rows), out=offsets[1:])
        return cls(n_rows, n_cols, offsets, u_cols, summed)

    @classmethod
    def from_dense(cls, dense):
        dense = np.atleast_2d(np.asarray(dense, dtype=np.float64))
        r, c = np.nonzero(dense)
        return cls.from_triplets(r, c, dense[r, c], dense.shape)

    @classmethod
    def identity(cls, n):
        idx = np.arange(n)
        return cls(n, n, np.arange(n + 1), idx, np.ones(n))

    def to_dense(self):
        out = np.zeros(self.shape)
        np.add.at(out, (self.row_ids, self.col_indices), self.values)
        return out

    def select_rows(self, start, stop):
        """Contiguous row block ``start:stop`` as a new matrix."""
        lo, hi = self.row_offsets[start], self.row_offsets[stop]
        return CsrMatrix(stop - start, self.n_cols, self.row_offsets[start:stop + 1] - lo,
                         self.col_indices[lo:hi], self.values[lo:hi])

    def matvec(self, x):
        return matvec(self, x)

    def rmatvec(self, y):
        return matvec_transpose(self, y)


def matvec(A: CsrMatrix, x) -> np.ndarray:
    """Compute ``A @ x`` row by row."""
    x = as_vector(x, name="x")
    if x.shape[0] != A.n_cols:
        raise DimensionError(f"matvec: x has length {x.shape[0]}, A has {A.n_cols} columns")
    products = A.values * x[A.col_indices]
    return np.bincount(A.row_ids, weights=products, minlength=A.n_rows).astype(np.float64)


def matvec_transpose(A: CsrMatrix, y) -> np.ndarray:
    """Compute ``A.T @ y`` without forming the transpose."""
    y = as_vector(y, name="y")
    if y.shape[0] != A.n_rows:
        raise DimensionError(f"matvec_transpose: y has length {y.shape[0]}, A has {A.n_rows} rows")
    products = A.values * y[A.row_ids]
    return np.bincount(A.col_indices, weights=products, minlength=A.n_cols).astype(np.float64)


def operator_norm_estimate(A: CsrMatrix, iterations: int = 100, seed: int = 0) -> float:
    """Estimate the spectral norm ``||A||_2`` by power iteration on ``A.T A``.

    The returned value is ``||A v||`` for a unit vector ``v``, so it never
    exceeds the true norm. The start vector is drawn from a seeded generator,
    which makes the estimate deterministic.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if A.nnz == 0 or not np.any(A.values):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.n_cols)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iterations):
        w = matvec_transpose(A, matvec(A, v))
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            # start vector fell into the null space; nothing more to learn
            break
        v = w / norm_w
        sigma = float(np.linalg.norm(matvec(A, v)))
    return sigma


_MM_HEADER = "%%MatrixMarket matrix coordinate real general"


def write_matrix_market(A: CsrMatrix, path) -> None:
    """Write `A` in Matrix Market coordinate format with 1-based indices."""
    rows = A.row_ids
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(_MM_HEADER + "\n")
        fh.write(f"{A.n_rows} {A.n_cols} {A.nnz}\n")
        for i, j, v in zip(rows.tolist(), A.col_indices.tolist(), A.values.tolist()):
            fh.write(f"{i + 1} {j + 1} {v:.17g}\n")


def read_matrix_market(path) -> CsrMatrix:
    text = Path(path).read_text(encoding="ascii").splitlines()
    if not text or not text[0].lower().startswith("%%matrixmarket matrix coordinate real"):
        raise ValueError(f"{path}: not a real coordinate Matrix Market file")
    body = [ln for ln in text[1:] if ln.strip() and not ln.startswith("%")]
    n_rows, n_cols, nnz = (int(t) for t in body[0].split())
    entries = body[1:1 + nnz]
    if len(entries) != nnz:
        raise ValueError(f"{path}: expected {nnz} entries, found {len(entries)}")
    if nnz == 0:
        return CsrMatrix(n_rows, n_cols, np.zeros(n_rows + 1, dtype=np.int64), [], [])
    data = np.array([ln.split() for ln in entries], dtype=object)
    rows = data[:, 0].astype(np.int64) - 1
    cols = data[:, 1].astype(np.int64) - 1
    vals = data[:, 2].astype(np.float64)
    return CsrMatrix.from_triplets(rows, cols, vals, (n_rows, n_cols))
