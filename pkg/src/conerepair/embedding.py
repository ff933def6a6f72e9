"""Primal-dual embedding: solvability certificate t*(theta) and its gradient.

The embedding of a cone program ``(A, b, c, K)`` is

    minimize t
    subject to ||(A x + s - b, A^T y + c, c^T x + b^T y)||_2 <= t,
               s in K, y in K*,

whose optimal value is zero exactly when the program is solvable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .cones import ConeProjector
from .errors import DegenerateGradientError, InvalidArgumentError
from .problem import ConeBlock, ConeDescriptor, ConeKind, ParamConeProgram, materialize
from .solver import Backend, Solution, SolverSettings, Status, solve
from .sparse import SparseMatrix

# below this residual norm the unit vector N/||N|| is numerically meaningless
GRAD_ZERO_THRESHOLD = 1e-9

EMBEDDING_SETTINGS = SolverSettings(eps_abs=1e-10, eps_rel=1e-10, max_iters=50_000)


@dataclass(frozen=True, eq=False)
class EmbeddingWitness:
    tstar: float
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    solver_status: Status
    residual: np.ndarray | None = None
    solution: Solution | None = None

    @property
    def solvable(self) -> bool:
        return self.tstar <= 1e-6


@dataclass(frozen=True, eq=False)
class Embedding:
    A: SparseMatrix
    b: np.ndarray
    c: np.ndarray
    cones: ConeDescriptor
    n: int
    m: int
    dual_rows: np.ndarray  # indices of y constrained to K* (non-zero blocks)

    @property
    def nvars(self) -> int:
        return 1 + self.n + 2 * self.m

    def split(self, z: np.ndarray):
        n, m = self.n, self.m
        return z[0], z[1 : 1 + n], z[1 + n : 1 + n + m], z[1 + n + m :]


def dual_blocks(cones: ConeDescriptor) -> tuple[ConeDescriptor, np.ndarray]:
    """Blocks of ``K*`` that constrain anything, with their row indices."""
    blocks, rows = [], []
    for blk, sl in cones.slices():
        if blk.kind is ConeKind.ZERO:
            continue
        blocks.append(blk)
        rows.extend(range(sl.start, sl.stop))
    return ConeDescriptor(tuple(blocks)), np.array(rows, dtype=np.int64)


def build_embedding(A: SparseMatrix, b, c, cones: ConeDescriptor) -> Embedding:
    """Standard-form data for the embedding over variables ``(t, x, y, s)``.

    Rows are, in order: one SOC block of dimension ``m + n + 2`` holding
    ``(t, N)``, the original cone ``K`` on ``s``, and ``K*`` on ``y`` with
    zero-cone blocks omitted (their dual is free).
    """
    m, n = A.shape
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    if b.size != m or c.size != n or cones.dim != m:
        raise InvalidArgumentError("embedding input dimensions are inconsistent")
    Ad = A.csc
    nv = 1 + n + 2 * m
    # slack_e = b_e - A_e z; for the SOC rows slack_e = (t, N)
    It = sp.csc_matrix(([1.0], ([0], [0])), shape=(1, nv))
    Z = lambda r, q: sp.csc_matrix((r, q))
    row_prim = sp.hstack([Z(m, 1), Ad, Z(m, m), sp.identity(m)])
    row_dual = sp.hstack([Z(n, 1), Z(n, n), Ad.T, Z(n, m)])
    row_gap = sp.hstack([Z(1, 1), sp.csr_matrix(c.reshape(1, -1)), sp.csr_matrix(b.reshape(1, -1)), Z(1, m)])
    kblocks, drows = dual_blocks(cones)
    s_rows = sp.hstack([Z(m, 1 + n + m), sp.identity(m)])
    y_sel = sp.identity(m, format="csr")[drows] if drows.size else Z(0, m)
    y_rows = sp.hstack([Z(drows.size, 1 + n), y_sel, Z(drows.size, m)])
    Ae = -sp.vstack([It, row_prim, row_dual, row_gap, s_rows, y_rows]).tocsc()
    be = np.concatenate([[0.0], -b, c, [0.0], np.zeros(m), np.zeros(drows.size)])
    ce = np.zeros(nv)
    ce[0] = 1.0
    cones_e = ConeDescriptor((ConeBlock(ConeKind.SOC, m + n + 2),)) + cones + kblocks
    return Embedding(SparseMatrix.from_scipy(Ae), be, ce, cones_e, n, m, drows)


def kkt_residual(A: SparseMatrix, b, c, x, y, s) -> np.ndarray:
    """The stacked residual ``N = (Ax + s - b, A^T y + c, c^T x + b^T y)``."""
    return np.concatenate([A.matvec(x) + s - b, A.rmatvec(y) + c, [c @ x + b @ y]])


def _witness_from(emb: Embedding, A, b, c, cones, sol: Solution) -> EmbeddingWitness:
    _, x, y, s = emb.split(np.asarray(sol.x))
    # project onto the cones so the witness is exactly feasible; the value
    # reported is the residual norm at that feasible point (an upper bound)
    s = ConeProjector(cones)(s)
    y = ConeProjector(cones, dual=True)(y)
    N = kkt_residual(A, b, c, x, y, s)
    return EmbeddingWitness(float(np.linalg.norm(N)), x, y, s, sol.status, N, sol)


def solve_embedding(
    A: SparseMatrix,
    b,
    c,
    cones: ConeDescriptor,
    settings: SolverSettings | None = None,
    warm: EmbeddingWitness | None = None,
    backend: Backend = solve,
) -> EmbeddingWitness:
    settings = settings or EMBEDDING_SETTINGS
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    emb = build_embedding(A, b, c, cones)
    m, n = A.shape
    zero = np.zeros(m)
    trivial = EmbeddingWitness(
        float(np.linalg.norm(np.concatenate([b, c]))),
        np.zeros(n), zero.copy(), zero.copy(), Status.SOLVED,
        kkt_residual(A, b, c, np.zeros(n), zero, zero),
    )
    if warm is not None and warm.solution is not None and warm.x.shape == (n,) and warm.y.shape == (m,):
        ws = warm.solution
    else:
        # the trivially feasible point (x, y, s) = 0, t = ||(b, c)||
        ws = None
    sol = backend(emb.A, emb.b, emb.c, emb.cones, settings, ws)
    if sol.status in (Status.INFEASIBLE_CERT, Status.UNBOUNDED_CERT):
        # cannot happen for exact arithmetic; fall back to the trivial point
        return trivial
    wit = _witness_from(emb, A, b, c, cones, sol)
    if not np.isfinite(wit.tstar) or wit.tstar > trivial.tstar:
        return trivial
    return wit


def eval_tstar(
    pcp: ParamConeProgram,
    theta,
    settings: SolverSettings | None = None,
    warm: EmbeddingWitness | None = None,
    backend: Backend = solve,
) -> EmbeddingWitness:
    """Solve the embedding of ``pcp`` at ``theta``."""
    A, b, c = materialize(pcp, theta)
    return solve_embedding(A, b, c, pcp.cones, settings, warm, backend)


def data_gradients(witness: EmbeddingWitness):
    """Gradients of ``t*`` with respect to ``(A, b, c)`` at the witness.

    Returns ``(u1, x, y, u2, g_b, g_c)`` where the gradient in ``A`` is the
    rank-two matrix ``u1 x^T + y u2^T`` (kept factored).
    """
    if witness.residual is None or witness.tstar <= GRAD_ZERO_THRESHOLD:
        raise DegenerateGradientError(
            f"t* = {witness.tstar:.3g} is below the gradient threshold {GRAD_ZERO_THRESHOLD:g}"
        )
    m, n = witness.y.size, witness.x.size
    u = witness.residual / np.linalg.norm(witness.residual)
    u1, u2, u3 = u[:m], u[m : m + n], u[-1]
    g_b = -u1 + u3 * witness.y
    g_c = u2 + u3 * witness.x
    return u1, witness.x, witness.y, u2, g_b, g_c


def grad_tstar(pcp: ParamConeProgram, theta, witness: EmbeddingWitness) -> np.ndarray:
    """Gradient of ``t*`` in ``theta`` by the envelope theorem.

    The feasible set of the embedding does not depend on ``theta``, so the
    derivative of its optimal value is the partial derivative of
    ``||N||_2`` at the witness: with ``u = N / ||N||``,
    ``dt*/dtheta_i = <u1 x^T + y u2^T, A_i> + <g_b, b_i> + <g_c, c_i>``.
    """
    pcp.check_theta(theta)
    u1, x, y, u2, g_b, g_c = data_gradients(witness)
    grad = np.zeros(pcp.k)
    for i, p in enumerate(pcp.params):
        val = 0.0
        if p.A is not None:
            val += float(np.sum(p.A.vals * (u1[p.A.rows] * x[p.A.cols] + y[p.A.rows] * u2[p.A.cols])))
        if p.b is not None:
            val += float(g_b @ p.b)
        if p.c is not None:
            val += float(g_c @ p.c)
        grad[i] = val
    return grad
