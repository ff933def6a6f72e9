"""Penalty / proximal-gradient repair and the exact convex repair for constant ``A``."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .embedding import (
    GRAD_ZERO_THRESHOLD,
    EmbeddingWitness,
    dual_blocks,
    eval_tstar,
    grad_tstar,
)
from .errors import (
    DegenerateGradientError,
    EpsilonInfeasibleError,
    InvalidArgumentError,
    UnsupportedProblemError,
)
from .problem import ConeBlock, ConeDescriptor, ConeKind, ParamConeProgram, increments_dense
from .regularizers import Box, Regularizer, ScaledL1, ScaledL2Sq, atoms, evaluate, prox
from .solver import Backend, SolverSettings, Status, solve
from .sparse import SparseMatrix

log = logging.getLogger(__name__)

MAX_CONSECUTIVE_REJECTS = 50
MIN_STEP = 1e-12


class RepairStatus(str, enum.Enum):
    REPAIRED = "REPAIRED"
    MAX_ITERS = "MAX_ITERS"
    STALLED = "STALLED"


@dataclass(frozen=True)
class RepairSettings:
    lambda0: float = 1.0
    alpha0: float = 1.0
    n_iter: int = 500
    eps_out: float = 1e-5
    eps_in: float = 1e-6
    lambda_decay: float = 0.5
    alpha_up: float = 1.2
    alpha_down: float = 0.5
    warm_start: bool = True

    def __post_init__(self):
        if not (self.lambda0 > 0 and self.alpha0 > 0):
            raise InvalidArgumentError("lambda0 and alpha0 must be positive")
        if self.n_iter < 0:
            raise InvalidArgumentError("n_iter must be nonnegative")
        if not (self.eps_out > 0 and self.eps_in > 0):
            raise InvalidArgumentError("tolerances must be positive")
        if not 0 < self.lambda_decay < 1:
            raise InvalidArgumentError("lambda_decay must lie in (0, 1)")
        if not self.alpha_up > 1:
            raise InvalidArgumentError("alpha_up must exceed 1")
        if not 0 < self.alpha_down < 1:
            raise InvalidArgumentError("alpha_down must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class TraceEntry:
    """One pass of the loop.

    ``lam`` and ``alpha`` are the values used for this step, ``grad`` the
    gradient at the current point, and ``tstar``/``r_value`` are evaluated
    at the point held after the accept/reject decision. ``stationary``
    marks a non-accepted step whose tentative point did not move (within
    ``eps_in`` in gradient-mapping norm); the penalty is then decreased and
    the step size kept.
    """

    iteration: int
    lam: float
    alpha: float
    tstar: float
    r_value: float
    accepted: bool
    grad: np.ndarray
    inner_residual: float = float("nan")
    stationary: bool = False


@dataclass(frozen=True, eq=False)
class RepairResult:
    theta: np.ndarray
    status: RepairStatus
    tstar: float
    r_value: float
    trace: tuple[TraceEntry, ...] = ()
    initial_tstar: float = float("nan")
    initial_r: float = float("nan")
    message: str = ""
    n_solves: int = 0

    @property
    def repaired(self) -> bool:
        return self.status is RepairStatus.REPAIRED


def repair(
    pcp: ParamConeProgram,
    r: Regularizer,
    theta0,
    settings: RepairSettings | None = None,
    solver_settings: SolverSettings | None = None,
    backend: Backend = solve,
    callback=None,
) -> RepairResult:
    """Search for nearby parameters that make ``pcp`` solvable.

    Minimizes ``L(theta, lam) = lam * r(theta) + t*(theta)`` by proximal
    gradient steps with an adaptive step size; the penalty ``lam`` is
    decreased whenever the inner stopping criterion is met on an accepted
    step, and the run stops once ``t*(theta) <= eps_out``.

    ``callback(entry)`` is invoked after every iteration when given.
    """
    settings = settings or RepairSettings()
    theta = pcp.check_theta(theta0).copy()
    r_val = evaluate(r, theta)
    if not np.isfinite(r_val):
        raise InvalidArgumentError("theta0 violates the hard constraints of the regularizer")

    n_solves = 0

    def tstar_at(th, warm):
        nonlocal n_solves
        n_solves += 1
        return eval_tstar(pcp, th, solver_settings, warm if settings.warm_start else None, backend)

    wit = tstar_at(theta, None)
    init_t, init_r = wit.tstar, r_val
    trace: list[TraceEntry] = []

    def result(status, msg=""):
        return RepairResult(
            theta, status, wit.tstar, r_val, tuple(trace), init_t, init_r, msg, n_solves
        )

    if wit.tstar <= settings.eps_out:
        return result(RepairStatus.REPAIRED, "already solvable")
    try:
        grad = grad_tstar(pcp, theta, wit)
    except DegenerateGradientError as exc:
        return result(RepairStatus.STALLED, str(exc))

    lam, alpha = settings.lambda0, settings.alpha0
    rejects = 0
    for it in range(1, settings.n_iter + 1):
        L_cur = lam * r_val + wit.tstar
        tent = prox(r, alpha * lam, theta - alpha * grad)
        wit_tent = tstar_at(tent, wit)
        r_tent = evaluate(r, tent)
        L_tent = lam * r_tent + wit_tent.tstar
        lam_used, alpha_used, grad_used = lam, alpha, grad
        inner = float("nan")
        stationary = False
        if L_tent < L_cur:
            rejects = 0
            if wit_tent.tstar > settings.eps_out:
                try:
                    grad_tent = grad_tstar(pcp, tent, wit_tent)
                except DegenerateGradientError as exc:
                    theta, wit, r_val = tent, wit_tent, r_tent
                    trace.append(TraceEntry(it, lam_used, alpha_used, wit.tstar, r_val, True, grad_used))
                    return result(RepairStatus.STALLED, str(exc))
                inner = float(np.linalg.norm((theta - tent) / alpha + (grad_tent - grad)))
            else:
                grad_tent = np.zeros_like(grad)
            theta, wit, r_val, grad = tent, wit_tent, r_tent, grad_tent
            alpha *= settings.alpha_up
            if inner <= settings.eps_in:
                lam *= settings.lambda_decay
            accepted = True
        elif np.linalg.norm(theta - tent) / alpha <= settings.eps_in:
            # prox-gradient fixed point: the inner problem is solved at theta
            inner = float(np.linalg.norm(theta - tent) / alpha)
            lam *= settings.lambda_decay
            stationary = True
            accepted = False
        else:
            alpha *= settings.alpha_down
            rejects += 1
            accepted = False
        entry = TraceEntry(
            it, lam_used, alpha_used, wit.tstar, r_val, accepted, grad_used, inner, stationary
        )
        trace.append(entry)
        if callback is not None:
            callback(entry)
        log.debug(
            "it %d lam %.3g alpha %.3g t* %.3e r %.5g %s",
            it, lam_used, alpha_used, wit.tstar, r_val, "accept" if accepted else "reject",
        )
        if wit.tstar <= settings.eps_out:
            return result(RepairStatus.REPAIRED)
        if rejects >= MAX_CONSECUTIVE_REJECTS or alpha < MIN_STEP:
            return result(
                RepairStatus.STALLED,
                f"{rejects} consecutive rejected steps, step size {alpha:.3g}",
            )
    return result(RepairStatus.MAX_ITERS, f"no repair after {settings.n_iter} iterations")


def replay(r: Regularizer, theta0, trace) -> np.ndarray:
    """Recompute the final parameters from the trace alone."""
    theta = np.asarray(theta0, dtype=np.float64).copy()
    for e in trace:
        tent = prox(r, e.alpha * e.lam, theta - e.alpha * e.grad)
        if e.accepted:
            theta = tent
    return theta


def _exact_program(pcp: ParamConeProgram, r: Regularizer, eps: float):
    """Cone program over ``(theta, x, y, s, aux)`` for the constant-``A`` repair."""
    k, n, m = pcp.k, pcp.n, pcp.m
    A = pcp.A0.csc
    incs = increments_dense(pcp)
    B = np.column_stack([p.b for p in incs]) if k else np.zeros((m, 0))
    C = np.column_stack([p.c for p in incs]) if k else np.zeros((n, 0))
    l1 = [a for a in atoms(r) if isinstance(a, ScaledL1)]
    l2 = [a for a in atoms(r) if isinstance(a, ScaledL2Sq)]
    boxes = [a for a in atoms(r) if isinstance(a, Box)]
    unknown = [a for a in atoms(r) if not isinstance(a, (ScaledL1, ScaledL2Sq, Box))]
    if unknown:
        raise UnsupportedProblemError(f"no conic form for {type(unknown[0]).__name__}")
    ne = k * len(l1)
    nq = len(l2)
    o_th, o_x, o_y, o_s, o_e, o_q = 0, k, k + n, k + n + m, k + n + 2 * m, k + n + 2 * m + ne
    nv = o_q + nq

    blocks_rows, rhs, cones = [], [], []

    def add(mat, b, block):
        blocks_rows.append(sp.csr_matrix(mat))
        rhs.append(np.asarray(b, dtype=np.float64))
        cones.append(block)

    def place(parts, nrows):
        """``parts`` maps column offset -> dense or sparse block."""
        M = sp.lil_matrix((nrows, nv))
        for off, blk in parts.items():
            blk = sp.csr_matrix(blk)
            M[:, off : off + blk.shape[1]] = blk
        return M

    if m:
        # A x + s = b0 + B theta
        add(place({o_th: -B, o_x: A, o_s: sp.identity(m)}, m), pcp.b0, ConeBlock(ConeKind.ZERO, m))
    if n:
        # A^T y + c0 + C theta = 0
        add(place({o_th: C, o_y: A.T}, n), -pcp.c0, ConeBlock(ConeKind.ZERO, n))
    # s in K_eps: SOC blocks shifted by eps along their axis
    for blk, sl in pcp.cones.slices():
        shift = np.zeros(blk.dim)
        if blk.kind is ConeKind.SOC and blk.dim > 1:
            shift[0] = eps
        sel = sp.lil_matrix((blk.dim, m))
        sel[:, sl] = sp.identity(blk.dim)
        add(place({o_s: -sel}, blk.dim), -shift, blk)
    # y in K*
    for blk, sl in pcp.cones.slices():
        if blk.kind is ConeKind.ZERO:
            continue
        sel = sp.lil_matrix((blk.dim, m))
        sel[:, sl] = sp.identity(blk.dim)
        add(place({o_y: -sel}, blk.dim), np.zeros(blk.dim), blk)
    cost = np.zeros(nv)
    for j, a in enumerate(l1):
        on = np.flatnonzero(a.weights > 0)
        e_off = o_e + j * k
        cost[e_off + on] = a.weights[on]
        if on.size:
            S = sp.csr_matrix((np.ones(on.size), (np.arange(on.size), on)), shape=(on.size, k))
            # e - (theta - c) >= 0 and e + (theta - c) >= 0
            add(place({o_th: S, e_off: -S}, on.size), a.center[on], ConeBlock(ConeKind.NONNEG, on.size))
            add(place({o_th: -S, e_off: -S}, on.size), -a.center[on], ConeBlock(ConeKind.NONNEG, on.size))
    for j, a in enumerate(l2):
        on = np.flatnonzero(a.weights > 0)
        cost[o_q + j] = 1.0
        sw = 2.0 * np.sqrt(a.weights[on])
        # ||(tau - 1, 2 sqrt(w) (theta - d))|| <= tau + 1
        M = sp.lil_matrix((2 + on.size, nv))
        M[0, o_q + j] = -1.0
        M[1, o_q + j] = -1.0
        for row, (i, wi) in enumerate(zip(on, sw)):
            M[2 + row, o_th + i] = -wi
        add(M, np.concatenate([[1.0, -1.0], -sw * a.center[on]]), ConeBlock(ConeKind.SOC, 2 + on.size))
    for a in boxes:
        lo = np.flatnonzero(np.isfinite(a.lower))
        hi = np.flatnonzero(np.isfinite(a.upper))
        if lo.size:
            S = sp.csr_matrix((-np.ones(lo.size), (np.arange(lo.size), lo)), shape=(lo.size, k))
            add(place({o_th: S}, lo.size), -a.lower[lo], ConeBlock(ConeKind.NONNEG, lo.size))
        if hi.size:
            S = sp.csr_matrix((np.ones(hi.size), (np.arange(hi.size), hi)), shape=(hi.size, k))
            add(place({o_th: S}, hi.size), a.upper[hi], ConeBlock(ConeKind.NONNEG, hi.size))
    Ae = sp.vstack(blocks_rows).tocsc() if blocks_rows else sp.csc_matrix((0, nv))
    return SparseMatrix.from_scipy(Ae), np.concatenate(rhs), cost, ConeDescriptor(tuple(cones))


def exact_repair_affine(
    pcp: ParamConeProgram,
    r: Regularizer,
    eps: float = 0.0,
    settings: SolverSettings | None = None,
    backend: Backend = solve,
) -> np.ndarray:
    """Globally optimal repair when ``A`` does not depend on ``theta``.

    Solves the single convex problem

        minimize r(theta)
        s.t.  A x + s = b(theta),  A^T y + c(theta) = 0,  s in K_eps,  y in K*

    where ``K_eps`` shrinks every non-polyhedral (SOC) block by ``eps``
    along its axis, ``||x||_2 <= t - eps``; polyhedral blocks are not
    shrunk. For purely polyhedral cones ``eps`` has no effect.
    """
    if not pcp.constant_A:
        raise UnsupportedProblemError("exact repair requires A to be independent of theta")
    if eps < 0:
        raise InvalidArgumentError("eps must be nonnegative")
    A, b, c, cones = _exact_program(pcp, r, eps)
    sol = backend(A, b, c, cones, settings or SolverSettings(), None)
    if sol.status is Status.INFEASIBLE_CERT:
        raise EpsilonInfeasibleError(
            f"no parameter makes the program solvable with interior margin eps={eps:g}; "
            "try a smaller eps"
        )
    if sol.status not in (Status.SOLVED, Status.INACCURATE):
        raise UnsupportedProblemError(f"convex repair problem not solved: {sol.status.value}")
    if sol.status is Status.INACCURATE:
        log.warning("convex repair solved inaccurately")
    theta = np.array(sol.x[: pcp.k])
    # clip onto box bounds that the first-order solve may violate by round-off
    for a in atoms(r):
        if isinstance(a, Box):
            theta = np.clip(theta, a.lower, a.upper)
    return theta


def interior_schedule(
    pcp: ParamConeProgram,
    r: Regularizer,
    eps_values=(1e-2, 1e-4, 1e-6),
    settings: SolverSettings | None = None,
) -> list[tuple[float, np.ndarray, float]]:
    """Run the exact repair over a decreasing margin schedule.

    Returns ``(eps, theta, r(theta))`` triples in schedule order.
    """
    out = []
    for eps in eps_values:
        theta = exact_repair_affine(pcp, r, eps, settings)
        out.append((eps, theta, evaluate(r, theta)))
    return out
