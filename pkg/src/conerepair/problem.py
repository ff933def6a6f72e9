"""Cone descriptors and affinely parametrized cone programs."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError
from .sparse import SparseMatrix


class ConeKind(str, enum.Enum):
    ZERO = "zero"
    NONNEG = "nonneg"
    SOC = "soc"


@dataclass(frozen=True)
class ConeBlock:
    kind: ConeKind
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "kind", ConeKind(self.kind))
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidArgumentError(f"{self.kind.value} block must have positive dim, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))


@dataclass(frozen=True)
class ConeDescriptor:
    """Ordered product of cone blocks partitioning a vector of length ``dim``.

    SOC blocks are ordered ``(t, x)`` with ``||x||_2 <= t``; a dimension-1
    SOC block is the nonnegative ray.
    """

    blocks: tuple[ConeBlock, ...] = ()

    def __post_init__(self):
        blocks = tuple(
            b if isinstance(b, ConeBlock) else ConeBlock(ConeKind(b[0]), b[1]) for b in self.blocks
        )
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def of(cls, *pairs) -> "ConeDescriptor":
        """``ConeDescriptor.of(("zero", 2), ("soc", 3))``."""
        return cls(tuple(ConeBlock(ConeKind(k), d) for k, d in pairs))

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    def slices(self):
        """Yield ``(block, slice)`` pairs in order."""
        start = 0
        for b in self.blocks:
            yield b, slice(start, start + b.dim)
            start += b.dim

    def __len__(self) -> int:
        return len(self.blocks)

    def __add__(self, other: "ConeDescriptor") -> "ConeDescriptor":
        return ConeDescriptor(self.blocks + other.blocks)


def _vec(v, n: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape != (n,):
        raise InvalidArgumentError(f"{name} must have length {n}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ParamIncrement:
    """Coefficient of one parameter in ``(A, b, c)``; ``None`` means zero."""

    A: SparseMatrix | None = None
    b: np.ndarray | None = None
    c: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class ParamConeProgram:
    """Cone program whose data is affine in a parameter vector ``theta``.

    ``A(theta) = A0 + sum_i theta_i A_i`` and likewise for ``b`` and ``c``.
    The program is

        minimize c^T x  subject to  A x + s = b,  s in K

    with dual ``maximize -b^T y`` over ``A^T y + c = 0, y in K*``.
    """

    A0: SparseMatrix
    b0: np.ndarray
    c0: np.ndarray
    cones: ConeDescriptor
    params: tuple[ParamIncrement, ...] = field(default_factory=tuple)

    def __post_init__(self):
        m, n = self.A0.shape
        object.__setattr__(self, "b0", _vec(self.b0, m, "b0"))
        object.__setattr__(self, "c0", _vec(self.c0, n, "c0"))
        if self.cones.dim != m:
            raise InvalidArgumentError(f"cone dimension {self.cones.dim} != number of rows {m}")
        params = []
        for i, p in enumerate(self.params):
            if p.A is not None and p.A.shape != (m, n):
                raise InvalidArgumentError(f"A_{i} has shape {p.A.shape}, expected {(m, n)}")
            params.append(
                ParamIncrement(
                    A=p.A if (p.A is not None and p.A.nnz) else None,
                    b=None if p.b is None else _vec(p.b, m, f"b_{i}"),
                    c=None if p.c is None else _vec(p.c, n, f"c_{i}"),
                )
            )
        object.__setattr__(self, "params", tuple(params))

    @property
    def m(self) -> int:
        return self.A0.nrows

    @property
    def n(self) -> int:
        return self.A0.ncols

    @property
    def k(self) -> int:
        return len(self.params)

    @property
    def constant_A(self) -> bool:
        return all(p.A is None for p in self.params)

    def check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.shape != (self.k,):
            raise InvalidArgumentError(f"theta must have length {self.k}, got {theta.size}")
        return theta

    def materialize(self, theta) -> tuple[SparseMatrix, np.ndarray, np.ndarray]:
        return materialize(self, theta)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamConeProgram):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a == b if isinstance(a, SparseMatrix) else np.array_equal(a, b)

        return (
            self.A0 == other.A0
            and np.array_equal(self.b0, other.b0)
            and np.array_equal(self.c0, other.c0)
            and self.cones == other.cones
            and self.k == other.k
            and all(
                same(p.A, q.A) and same(p.b, q.b) and same(p.c, q.c)
                for p, q in zip(self.params, other.params)
            )
        )


def materialize(pcp: ParamConeProgram, theta) -> tuple[SparseMatrix, np.ndarray, np.ndarray]:
    """Evaluate ``(A(theta), b(theta), c(theta))``.

    The sparsity pattern of the result is the union of the base pattern and
    the patterns of all increments, whatever the value of ``theta``.
    """
    theta = pcp.check_theta(theta)
    rows = [pcp.A0.rows]
    cols = [pcp.A0.cols]
    vals = [pcp.A0.vals]
    b = pcp.b0.copy()
    c = pcp.c0.copy()
    for t, p in zip(theta, pcp.params):
        if p.A is not None:
            rows.append(p.A.rows)
            cols.append(p.A.cols)
            vals.append(t * p.A.vals)
        if p.b is not None:
            b += t * p.b
        if p.c is not None:
            c += t * p.c
    A = SparseMatrix(pcp.m, pcp.n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
    return A, b, c


def increments_dense(pcp: ParamConeProgram) -> list[ParamIncrement]:
    """Increments with ``None`` filled in by zeros (dense ``b``/``c``)."""
    out = []
    for p in pcp.params:
        out.append(
            ParamIncrement(
                A=p.A if p.A is not None else SparseMatrix.zeros(pcp.m, pcp.n),
                b=p.b if p.b is not None else np.zeros(pcp.m),
                c=p.c if p.c is not None else np.zeros(pcp.n),
            )
        )
    return out


def make_program(A0, b0, c0, cones, params: Sequence = ()) -> ParamConeProgram:
    """Convenience constructor accepting dense arrays and tuples.

    Each entry of ``params`` is a ``ParamIncrement``, a dict with optional
    ``A``/``b``/``c`` keys, or an ``(A, b, c)`` tuple. Dense matrices are
    converted to :class:`SparseMatrix`.
    """

    def as_sparse(M):
        if M is None or isinstance(M, SparseMatrix):
            return M
        return SparseMatrix.from_dense(M)

    if not isinstance(cones, ConeDescriptor):
        cones = ConeDescriptor.of(*cones)
    A0 = as_sparse(A0)
    incs = []
    for p in params:
        if isinstance(p, ParamIncrement):
            incs.append(ParamIncrement(as_sparse(p.A), p.b, p.c))
        elif isinstance(p, dict):
            incs.append(ParamIncrement(as_sparse(p.get("A")), p.get("b"), p.get("c")))
        else:
            a, b, c = p
            incs.append(ParamIncrement(as_sparse(a), b, c))
    return ParamConeProgram(A0, b0, c0, cones, tuple(incs))
