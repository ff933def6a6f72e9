"""Canonical triplet sparse matrices."""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError


class SparseMatrix:
    """Real sparse matrix stored as sorted, deduplicated (row, col, value) triplets.

    Triplets are sorted column-major, duplicates are summed. Explicit zeros
    produced by summation are kept so that the sparsity pattern of a sum is
    the union of the patterns of its terms. A compressed-column view is
    built lazily and cached; instances are treated as immutable.
    """


    def __init__(self, nrows, ncols, rows=(), cols=(), vals=()):
        nrows, ncols = int(nrows), int(ncols)
        if nrows < 0 or ncols < 0:
            raise InvalidArgumentError(f"negative shape ({nrows}, {ncols})")
        rows = np.asarray(rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(cols, dtype=np.int64).reshape(-1)
        vals = np.asarray(vals, dtype=np.float64).reshape(-1)
        if not (rows.size == cols.size == vals.size):
            raise InvalidArgumentError("rows, cols and vals must have equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= nrows:
                raise InvalidArgumentError(f"row index out of range for {nrows} rows")
            if cols.min() < 0 or cols.max() >= ncols:
                raise InvalidArgumentError(f"column index out of range for {ncols} columns")
            if not np.all(np.isfinite(vals)):
                raise InvalidArgumentError("matrix entries must be finite")
        key = cols * max(nrows, 1) + rows
        order = np.argsort(key, kind="stable")
        key = key[order]
        uniq, start = np.unique(key, return_index=True)
        summed = np.add.reduceat(vals[order], start) if key.size else vals[:0]
        self.nrows = nrows
        self.ncols = ncols
        self.rows = rows[order][start]
        self.cols = cols[order][start]
        self.vals = summed
        for arr in (self.rows, self.cols, self.vals):
            arr.setflags(write=False)

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "SparseMatrix":
        return cls(nrows, ncols)

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        dense = np.atleast_2d(np.asarray(dense, dtype=np.float64))
        r, c = np.nonzero(dense)
        return cls(dense.shape[0], dense.shape[1], r, c, dense[r, c])

    @classmethod
    def from_scipy(cls, mat) -> "SparseMatrix":
        coo = sp.coo_matrix(mat)
        return cls(coo.shape[0], coo.shape[1], coo.row, coo.col, coo.data)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    @cached_property
    def csc(self) -> sp.csc_matrix:
        """Compressed-column view (cached)."""
        mat = sp.csc_matrix(
            (self.vals, (self.rows, self.cols)), shape=self.shape, dtype=np.float64
        )
        mat.sort_indices()
        return mat

    @cached_property
    def csr_t(self) -> sp.csr_matrix:
        """Transpose in CSR form, for fast ``A.T @ y``."""
        return self.csc.T.tocsr()

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.ncols,):
            raise InvalidArgumentError(f"expected vector of length {self.ncols}, got {x.shape}")
        return self.csc @ x

    def rmatvec(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.nrows,):
            raise InvalidArgumentError(f"expected vector of length {self.nrows}, got {y.shape}")
        return self.csc.T @ y

    def todense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.rows, self.cols), self.vals)
        return out

    def scaled(self, alpha: float) -> "SparseMatrix":
        return SparseMatrix(self.nrows, self.ncols, self.rows, self.cols, alpha * self.vals)

    def __add__(self, other: "SparseMatrix") -> "SparseMatrix":
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if other.shape != self.shape:
            raise InvalidArgumentError(f"shape mismatch {self.shape} vs {other.shape}")
        return SparseMatrix(
            self.nrows,
            self.ncols,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate([self.vals, other.vals]),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"

    def triplets(self):
        """Iterate ``(row, col, value)`` in canonical order."""
        for r, c, v in zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist()):
            yield r, c, v
