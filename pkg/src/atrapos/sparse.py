"""Compressed sparse column matrices of instance counts and their cost models."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

U64_MAX = 2**64 - 1

_HEADER = struct.Struct("<qqq")  # rows, cols, nnz


class ShapeMismatch(ValueError):
    """Inner dimensions of a multiplication do not agree."""


class CountOverflow(OverflowError):
    """A result count does not fit in an unsigned 64-bit value."""


class SparseMatrix:
    """Column-compressed matrix of unsigned 64-bit instance counts.

    Storage is canonical: per-column offsets, row indices strictly increasing
    within each column, and no explicit zeros. Instances are immutable; all
    operations return new matrices.
    """

    __slots__ = ("rows", "cols", "indptr", "indices", "values")

    def __init__(
        self,
        rows: int,
        cols: int,
        indptr: np.ndarray,
        indices: np.ndarray,
        values: np.ndarray,
        *,
        validate: bool = True,
    ) -> None:
        self.rows = int(rows)
        self.cols = int(cols)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.uint64)
        if validate:
            self._check()

    def _check(self) -> None:
        if self.rows < 0 or self.cols < 0:
            raise ValueError("negative dimensions")
        if self.indptr.shape != (self.cols + 1,):
            raise ValueError("offset array must have cols+1 entries")
        if self.indptr[0] != 0 or int(self.indptr[-1]) != len(self.indices):
            raise ValueError("offsets must start at 0 and end at nnz")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("offsets must be monotone non-decreasing")
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values length mismatch")
        if len(self.indices):
            if self.indices.min() < 0 or self.indices.max() >= self.rows:
                raise ValueError("row index out of range")
            # strictly increasing within each column
            diffs = np.diff(self.indices)
            boundary = np.zeros(len(self.indices) - 1, dtype=bool) if len(self.indices) > 1 else None
            if boundary is not None:
                inner = self.indptr[1:-1]
                boundary[inner[(inner > 0) & (inner < len(self.indices))] - 1] = True
                if np.any((diffs <= 0) & ~boundary):
                    raise ValueError("row indices must be strictly increasing per column")
            if np.any(self.values == 0):
                raise ValueError("explicit zero values are not stored")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, rows: int, cols: int) -> SparseMatrix:
        return cls(
            rows,
            cols,
            np.zeros(cols + 1, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.uint64),
            validate=False,
        )

    @classmethod
    def identity(cls, n: int) -> SparseMatrix:
        return cls(
            n,
            n,
            np.arange(n + 1, dtype=np.int64),
            np.arange(n, dtype=np.int64),
            np.ones(n, dtype=np.uint64),
            validate=False,
        )

    @classmethod
    def from_coo(
        cls,
        rows: int,
        cols: int,
        row_idx,
        col_idx,
        vals=None,
    ) -> SparseMatrix:
        """Build from coordinate triples; duplicate coordinates are summed."""
        ri = np.asarray(row_idx, dtype=np.int64)
        ci = np.asarray(col_idx, dtype=np.int64)
        if vals is None:
            vv = np.ones(len(ri), dtype=np.uint64)
        else:
            vv = np.asarray(vals, dtype=np.uint64)
        if len(ri) == 0:
            return cls.zeros(rows, cols)
        if ri.min() < 0 or ri.max() >= rows or ci.min() < 0 or ci.max() >= cols:
            raise ValueError("coordinate out of range")
        order = np.lexsort((ri, ci))
        ri, ci, vv = ri[order], ci[order], vv[order]
        keys = ci * rows + ri
        uniq, start = np.unique(keys, return_index=True)
        sums = np.add.reduceat(vv.astype(object), start)
        for s in sums:
            if int(s) > U64_MAX:
                raise CountOverflow("summed duplicate exceeds 64-bit count")
        vv = np.array([int(s) for s in sums], dtype=np.uint64)
        ri = ri[start]
        ci = ci[start]
        keep = vv != 0
        ri, ci, vv = ri[keep], ci[keep], vv[keep]
        indptr = np.zeros(cols + 1, dtype=np.int64)
        np.add.at(indptr, ci + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(rows, cols, indptr, ri, vv, validate=False)

    @classmethod
    def from_dense(cls, dense) -> SparseMatrix:
        arr = np.asarray(dense)
        rows, cols = arr.shape
        ri, ci = np.nonzero(arr)
        return cls.from_coo(rows, cols, ri, ci, arr[ri, ci].astype(np.uint64))

    # -- views -------------------------------------------------------------

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def density(self) -> float:
        cells = self.rows * self.cols
        return self.nnz / cells if cells else 0.0

    def stats(self) -> MatrixStats:
        return MatrixStats(self.rows, self.cols, self.density)

    def size_bytes(self) -> int:
        """Exact bytes of the compressed layout: offsets plus (index, value) pairs."""
        return 8 * (self.cols + 1) + 16 * self.nnz

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=np.uint64)
        for j in range(self.cols):
            sl = slice(int(self.indptr[j]), int(self.indptr[j + 1]))
            out[self.indices[sl], j] = self.values[sl]
        return out

    def items(self):
        """Yield (row, col, count) triples in column-major order."""
        for j in range(self.cols):
            for t in range(int(self.indptr[j]), int(self.indptr[j + 1])):
                yield int(self.indices[t]), j, int(self.values[t])

    def transpose(self) -> SparseMatrix:
        ri, ci, vv = [], [], []
        for i, j, v in self.items():
            ri.append(j)
            ci.append(i)
            vv.append(v)
        return SparseMatrix.from_coo(self.cols, self.rows, ri, ci, vv)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):  # pragma: no cover - matrices are not dict keys
        return id(self)

    def __repr__(self) -> str:
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz})"

    # -- filtering ---------------------------------------------------------

    def filter_rows(self, keep: np.ndarray) -> SparseMatrix:
        """Zero out rows where ``keep`` is False, without building a diagonal."""
        keep = np.asarray(keep, dtype=bool)
        if keep.shape != (self.rows,):
            raise ValueError("row mask length mismatch")
        flags = keep[self.indices]
        cum = np.concatenate(([0], np.cumsum(flags)))
        return SparseMatrix(
            self.rows,
            self.cols,
            cum[self.indptr],
            self.indices[flags],
            self.values[flags],
            validate=False,
        )

    def filter_cols(self, keep: np.ndarray) -> SparseMatrix:
        """Zero out columns where ``keep`` is False."""
        keep = np.asarray(keep, dtype=bool)
        if keep.shape != (self.cols,):
            raise ValueError("column mask length mismatch")
        col_ids = np.repeat(np.arange(self.cols), np.diff(self.indptr))
        flags = keep[col_ids]
        cum = np.concatenate(([0], np.cumsum(flags)))
        return SparseMatrix(
            self.rows,
            self.cols,
            cum[self.indptr],
            self.indices[flags],
            self.values[flags],
            validate=False,
        )

    # -- serialization -----------------------------------------------------

    def to_bytes(self) -> bytes:
        """Little-endian layout: dims, nonzero count, offsets, indices, values."""
        head = _HEADER.pack(self.rows, self.cols, self.nnz)
        return (
            head
            + self.indptr.astype("<i8").tobytes()
            + self.indices.astype("<i8").tobytes()
            + self.values.astype("<u8").tobytes()
        )

    @classmethod
    def from_bytes(cls, blob: bytes) -> SparseMatrix:
        rows, cols, nnz = _HEADER.unpack_from(blob, 0)
        off = _HEADER.size
        indptr = np.frombuffer(blob, dtype="<i8", count=cols + 1, offset=off)
        off += 8 * (cols + 1)
        indices = np.frombuffer(blob, dtype="<i8", count=nnz, offset=off)
        off += 8 * nnz
        values = np.frombuffer(blob, dtype="<u8", count=nnz, offset=off)
        return cls(rows, cols, indptr.copy(), indices.copy(), values.copy())


@dataclass(frozen=True)
class MatrixStats:
    """Lightweight stand-in for a matrix: dimensions and a density in [0, 1]."""

    rows: int
    cols: int
    density: float

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("dimensions must be at least 1")
        if not 0.0 <= self.density <= 1.0:
            raise ValueError("density must lie in [0, 1]")


@dataclass(frozen=True)
class CostCoefficients:
    """Per-unit weights for the three terms of the sparse multiplication cost."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative")


def spgemm(x: SparseMatrix, y: SparseMatrix) -> tuple[SparseMatrix, int]:
    """Exact integer product Z = X * Y with a count of multiply-accumulate steps.

    Gustavson-style: a dense scratch accumulator of length ``rows`` is filled
    column by column of Y. The returned op count covers scalar
    multiply-accumulates only, not scatter or reset overhead. Raises
    CountOverflow if any result count exceeds 64 bits.
    """
    if x.cols != y.rows:
        raise ShapeMismatch(f"cannot multiply {x.rows}x{x.cols} by {y.rows}x{y.cols}")
    if x.nnz == 0 or y.nnz == 0:
        return SparseMatrix.zeros(x.rows, y.cols), 0
    bound = int(x.values.max()) * int(y.values.max()) * x.cols
    if bound <= U64_MAX:
        return _spgemm_u64(x, y)
    return _spgemm_bigint(x, y)


def _spgemm_u64(x: SparseMatrix, y: SparseMatrix) -> tuple[SparseMatrix, int]:
    scratch = np.zeros(x.rows, dtype=np.uint64)
    xp, xi, xv = x.indptr, x.indices, x.values
    yp, yi, yv = y.indptr, y.indices, y.values
    out_indptr = np.zeros(y.cols + 1, dtype=np.int64)
    idx_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []
    ops = 0
    nnz = 0
    for j in range(y.cols):
        touched: list[np.ndarray] = []
        for t in range(int(yp[j]), int(yp[j + 1])):
            k = int(yi[t])
            xs, xe = int(xp[k]), int(xp[k + 1])
            if xs == xe:
                continue
            rows = xi[xs:xe]
            scratch[rows] += xv[xs:xe] * yv[t]
            touched.append(rows)
            ops += xe - xs
        if touched:
            if len(touched) == 1:
                tr = touched[0]
            else:
                tr = np.unique(np.concatenate(touched))
            # counts are positive, so every touched row is a nonzero
            idx_parts.append(tr.copy() if len(touched) == 1 else tr)
            val_parts.append(scratch[tr].copy())
            scratch[tr] = 0
            nnz += len(tr)
        out_indptr[j + 1] = nnz
    if nnz == 0:
        return SparseMatrix.zeros(x.rows, y.cols), ops
    z = SparseMatrix(
        x.rows,
        y.cols,
        out_indptr,
        np.concatenate(idx_parts),
        np.concatenate(val_parts),
        validate=False,
    )
    return z, ops


def _spgemm_bigint(x: SparseMatrix, y: SparseMatrix) -> tuple[SparseMatrix, int]:
    # Exact fallback for count ranges where u64 arithmetic could wrap.
    xcols: dict[int, tuple[list[int], list[int]]] = {}

    def xcol(k: int) -> tuple[list[int], list[int]]:
        got = xcols.get(k)
        if got is None:
            xs, xe = int(x.indptr[k]), int(x.indptr[k + 1])
            got = (x.indices[xs:xe].tolist(), x.values[xs:xe].tolist())
            xcols[k] = got
        return got

    out_indptr = [0]
    out_idx: list[int] = []
    out_val: list[int] = []
    ops = 0
    for j in range(y.cols):
        acc: dict[int, int] = {}
        ys, ye = int(y.indptr[j]), int(y.indptr[j + 1])
        for t in range(ys, ye):
            k = int(y.indices[t])
            yval = int(y.values[t])
            rows, vals = xcol(k)
            for r, xval in zip(rows, vals):
                acc[r] = acc.get(r, 0) + xval * yval
            ops += len(rows)
        for r in sorted(acc):
            v = acc[r]
            if v > U64_MAX:
                raise CountOverflow(
                    f"count at ({r}, {j}) exceeds the 64-bit range"
                )
            out_idx.append(r)
            out_val.append(v)
        out_indptr.append(len(out_idx))
    z = SparseMatrix(
        x.rows,
        y.cols,
        np.array(out_indptr, dtype=np.int64),
        np.array(out_idx, dtype=np.int64),
        np.array(out_val, dtype=np.uint64),
        validate=False,
    )
    return z, ops


def estimate_density(rho_x: float, rho_y: float, n: int) -> float:
    """Average-case density of a sparse product: 1 - (1 - rho_x*rho_y)^n."""
    if not 0.0 <= rho_x <= 1.0 or not 0.0 <= rho_y <= 1.0:
        raise ValueError("densities must lie in [0, 1]")
    if n < 1:
        raise ValueError("inner dimension must be at least 1")
    est = 1.0 - (1.0 - rho_x * rho_y) ** n
    return min(1.0, max(0.0, est))


def estimate_cost(
    x: MatrixStats, y: MatrixStats, coeffs: CostCoefficients
) -> tuple[float, MatrixStats]:
    """Predicted cost of multiplying matrices with the given shapes and densities.

    Three regime terms: reading the nonzeros of X, the expected
    multiply-accumulate work, and materializing the estimated nonzeros of Z.
    Returns the cost together with the stats of the estimated result.
    """
    if x.cols != y.rows:
        raise ShapeMismatch(f"cannot multiply {x.rows}x{x.cols} by {y.rows}x{y.cols}")
    m, n, l = x.rows, x.cols, y.cols
    nnz_x = m * n * x.density
    n_op = m * n * x.density * l * y.density
    rho_z = estimate_density(x.density, y.density, n)
    nnz_z = m * l * rho_z
    cost = coeffs.alpha * nnz_x + coeffs.beta * n_op + coeffs.gamma * nnz_z
    return cost, MatrixStats(m, l, rho_z)


def standard_cost(x: MatrixStats, y: MatrixStats) -> int:
    """Dense multiplication cost: m * n * l scalar operations."""
    if x.cols != y.rows:
        raise ShapeMismatch(f"cannot multiply {x.rows}x{x.cols} by {y.rows}x{y.cols}")
    return x.rows * x.cols * y.cols


def cost_terms(x: MatrixStats, y: MatrixStats) -> tuple[float, float, float]:
    """The three estimated cost-model terms for one multiplication."""
    m, n, l = x.rows, x.cols, y.cols
    rho_z = estimate_density(x.density, y.density, n)
    return (m * n * x.density, m * n * x.density * l * y.density, m * l * rho_z)


def fit_cost_model(
    samples: list[tuple[MatrixStats, MatrixStats, float]],
) -> CostCoefficients:
    """Least-squares fit of the cost coefficients from timed multiplications.

    Each sample is (x_stats, y_stats, measured_time); the design matrix holds
    the three estimated cost terms. Negative solutions are clamped to zero and
    the remaining terms refit.
    """
    if len(samples) < 3:
        raise ValueError("need at least 3 samples")
    design = np.array([cost_terms(x, y) for x, y, _ in samples], dtype=np.float64)
    target = np.array([t for _, _, t in samples], dtype=np.float64)
    if np.linalg.matrix_rank(design) < 3:
        raise ValueError("rank-deficient sample set")
    active = [0, 1, 2]
    out = np.zeros(3)
    while active:
        sol, *_ = np.linalg.lstsq(design[:, active], target, rcond=None)
        if np.all(sol >= 0.0):
            for col, v in zip(active, sol):
                out[col] = v
            break
        active = [col for col, v in zip(active, sol) if v >= 0.0]
    return CostCoefficients(float(out[0]), float(out[1]), float(out[2]))
