"""Compressed sparse row matrices sized for event-history design matrices.

Only the operations the likelihood machinery needs are provided: triplet
assembly, matrix-vector products in both directions, memory accounting and a
small binary dump format.  The heavy products are delegated to scipy's CSR
kernels, which accumulate each row in column order, so results are bitwise
reproducible run to run.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

_MAGIC = b"PPH1"


@dataclass(frozen=True)
class SparseCsr:
    """CSR matrix: ``row_ptr`` offsets, ``col_idx`` per-row sorted columns, ``values``."""

    nrows: int
    ncols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    _sp: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.row_ptr.shape != (self.nrows + 1,):
            raise ValueError("row_ptr must have length nrows + 1")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != len(self.values):
            raise ValueError("row_ptr endpoints inconsistent with nnz")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must be nondecreasing")
        if len(self.col_idx) != len(self.values):
            raise ValueError("col_idx and values length mismatch")
        if len(self.col_idx) and (self.col_idx.min() < 0 or self.col_idx.max() >= self.ncols):
            raise ValueError("column index out of range")
        mat = sp.csr_matrix(
            (self.values, self.col_idx, self.row_ptr),
            shape=(self.nrows, self.ncols),
            copy=False,
        )
        object.__setattr__(self, "_sp", mat)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def toarray(self) -> np.ndarray:
        return self._sp.toarray()

    def rows_dense(self, lo: int, hi: int) -> np.ndarray:
        """Dense copy of the row block lo:hi."""
        return self._sp[lo:hi].toarray()


def from_triplets(
    nrows: int, ncols: int, entries: tuple[np.ndarray, np.ndarray, np.ndarray] | list
) -> SparseCsr:
    """Assemble a CSR matrix from (row, col, value) triplets.

    Accepts a list of (row, col, value) tuples or a tuple of three parallel
    arrays.  Duplicate coordinates are summed and exact zeros dropped.
    Triplets are ordered by (row, col, value) before accumulation, so the
    result does not depend on the input ordering, even in floating point.
    """
    if (
        isinstance(entries, tuple)
        and len(entries) == 3
        and all(isinstance(e, np.ndarray) for e in entries)
    ):
        rows, cols, vals = entries
    else:
        arr = np.asarray(list(entries), dtype=np.float64)
        if arr.size == 0:
            arr = arr.reshape(0, 3)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("entries must be (row, col, value) triplets")
        rows, cols, vals = arr[:, 0], arr[:, 1], arr[:, 2]
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.shape != cols.shape or rows.shape != vals.shape:
        raise ValueError("triplet arrays must have equal length")
    if len(rows):
        if rows.min() < 0 or rows.max() >= nrows:
            raise ValueError("row index out of range")
        if cols.min() < 0 or cols.max() >= ncols:
            raise ValueError("column index out of range")
    order = np.lexsort((vals, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if len(rows):
        new_group = np.empty(len(rows), dtype=bool)
        new_group[0] = True
        new_group[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(new_group)
        summed = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]
        keep = summed != 0.0
        rows, cols, summed = rows[keep], cols[keep], summed[keep]
    else:
        summed = vals
    row_ptr = np.zeros(nrows + 1, dtype=np.int32)
    np.add.at(row_ptr, rows + 1, 1)
    row_ptr = np.cumsum(row_ptr, dtype=np.int64).astype(np.int32)
    return SparseCsr(nrows, ncols, row_ptr, cols.astype(np.int32), summed)


def vstack(blocks: list[SparseCsr]) -> SparseCsr:
    """Stack matrices with a common column count as consecutive row groups."""
    if not blocks:
        raise ValueError("nothing to stack")
    ncols = blocks[0].ncols
    if any(b.ncols != ncols for b in blocks):
        raise ValueError("column counts differ")
    nrows = sum(b.nrows for b in blocks)
    ptr = [np.zeros(1, dtype=np.int32)]
    offset = 0
    for b in blocks:
        ptr.append(b.row_ptr[1:].astype(np.int64) + offset)
        offset += b.nnz
    return SparseCsr(
        nrows,
        ncols,
        np.concatenate(ptr).astype(np.int32),
        np.concatenate([b.col_idx for b in blocks]),
        np.concatenate([b.values for b in blocks]),
    )


def spmv(a: SparseCsr, x: np.ndarray) -> np.ndarray:
    """y = A x with per-row accumulation in column order."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (a.ncols,):
        raise ValueError(f"expected vector of length {a.ncols}, got {x.shape}")
    return a._sp @ x


def spmv_t(a: SparseCsr, y: np.ndarray) -> np.ndarray:
    """x = A^T y."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (a.nrows,):
        raise ValueError(f"expected vector of length {a.nrows}, got {y.shape}")
    return a._sp.T @ y


def memory_footprint(a: SparseCsr) -> tuple[int, int]:
    """(bytes of the three stored arrays, bytes of the dense float64 equivalent)."""
    sparse_bytes = a.row_ptr.nbytes + a.col_idx.nbytes + a.values.nbytes
    dense_bytes = a.nrows * a.ncols * 8
    return sparse_bytes, dense_bytes


def dump_bytes(a: SparseCsr) -> bytes:
    """Serialize: magic, (nrows, ncols, nnz) as u64 LE, then row_ptr/col_idx as i64 LE and values as f64 LE."""
    head = _MAGIC + struct.pack("<QQQ", a.nrows, a.ncols, a.nnz)
    body = (
        a.row_ptr.astype("<i8").tobytes()
        + a.col_idx.astype("<i8").tobytes()
        + a.values.astype("<f8").tobytes()
    )
    return head + body


def load_bytes(buf: bytes) -> SparseCsr:
    if buf[:4] != _MAGIC:
        raise ValueError("bad magic bytes")
    nrows, ncols, nnz = struct.unpack_from("<QQQ", buf, 4)
    off = 4 + 24
    row_ptr = np.frombuffer(buf, dtype="<i8", count=nrows + 1, offset=off)
    off += (nrows + 1) * 8
    col_idx = np.frombuffer(buf, dtype="<i8", count=nnz, offset=off)
    off += nnz * 8
    values = np.frombuffer(buf, dtype="<f8", count=nnz, offset=off)
    return SparseCsr(
        int(nrows),
        int(ncols),
        row_ptr.astype(np.int32),
        col_idx.astype(np.int32),
        values.astype(np.float64),
    )
