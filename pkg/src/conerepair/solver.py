"""Reference first-order conic solver.

Solves

    minimize c^T x  s.t.  A x + s = b, s in K          (primal)
    maximize -b^T y s.t.  A^T y + c = 0, y in K*        (dual)

by Douglas-Rachford splitting on the homogeneous self-dual embedding, with
Ruiz equilibration, over-relaxation and safeguarded type-II Anderson
acceleration. One sparse quasi-definite factorization is computed per
distinct ``A`` and cached.
"""

from __future__ import annotations

import enum
import hashlib
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import ConeProjector, cone_violation
from .errors import InvalidArgumentError, NumericalError
from .problem import ConeDescriptor, ConeKind
from .sparse import SparseMatrix

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    SOLVED = "SOLVED"
    INACCURATE = "INACCURATE"
    MAX_ITERS = "MAX_ITERS"
    INFEASIBLE_CERT = "INFEASIBLE_CERT"
    UNBOUNDED_CERT = "UNBOUNDED_CERT"


@dataclass(frozen=True)
class SolverSettings:
    eps_abs: float = 1e-8
    eps_rel: float = 1e-8
    max_iters: int = 100_000
    scaling_enabled: bool = True
    eps_infeas: float = 1e-8
    relaxation: float = 1.5
    anderson_memory: int = 5
    check_every: int = 5
    dual_scale: float = 1.0

    def __post_init__(self):
        if not (self.eps_abs > 0 and self.eps_rel > 0 and self.eps_infeas > 0):
            raise InvalidArgumentError("solver tolerances must be positive")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if not 0 < self.relaxation < 2:
            raise InvalidArgumentError("relaxation must lie in (0, 2)")


@dataclass(frozen=True, eq=False)
class Solution:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    status: Status
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    gap: float = float("nan")
    iterations: int = 0
    info: dict = field(default_factory=dict)


class Backend(Protocol):
    def __call__(
        self,
        A: SparseMatrix,
        b: np.ndarray,
        c: np.ndarray,
        cones: ConeDescriptor,
        settings: SolverSettings,
        warm: Optional[Solution] = None,
    ) -> Solution: ...


def _validate(A: SparseMatrix, b, c, cones: ConeDescriptor):
    if not isinstance(A, SparseMatrix):
        raise InvalidArgumentError("A must be a SparseMatrix")
    m, n = A.shape
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    if b.size != m or c.size != n:
        raise InvalidArgumentError(f"A is {m}x{n} but len(b)={b.size}, len(c)={c.size}")
    if cones.dim != m:
        raise InvalidArgumentError(f"cone dimension {cones.dim} != {m} rows")
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise InvalidArgumentError("b and c must be finite")
    return b, c


def residuals(A: SparseMatrix, b, c, cones: ConeDescriptor, candidate: Solution):
    """Unnormalized residuals ``(||Ax+s-b||, ||A^T y + c||, |c^T x + b^T y|)``."""
    b, c = _validate(A, b, c, cones)
    x, y, s = (np.asarray(v, dtype=np.float64) for v in (candidate.x, candidate.y, candidate.s))
    if x.shape != (A.ncols,) or y.shape != (A.nrows,) or s.shape != (A.nrows,):
        raise InvalidArgumentError("candidate dimensions do not match A")
    pri = float(np.linalg.norm(A.matvec(x) + s - b))
    dua = float(np.linalg.norm(A.rmatvec(y) + c))
    gap = float(abs(c @ x + b @ y))
    return pri, dua, gap


def is_converged(pri, dua, gap, b, c, cx, by, settings: SolverSettings) -> bool:
    ea, er = settings.eps_abs, settings.eps_rel
    return (
        pri <= ea + er * np.linalg.norm(b)
        and dua <= ea + er * np.linalg.norm(c)
        and gap <= ea + er * (abs(cx) + abs(by))
    )


# --------------------------------------------------------------------------
# equilibration and factorization workspace


def _ruiz(Acsc: sp.csc_matrix, cones: ConeDescriptor, iters: int = 25):
    m, n = Acsc.shape
    D = np.ones(m)
    E = np.ones(n)
    M = Acsc.copy()
    groups = [sl for blk, sl in cones.slices() if blk.kind is ConeKind.SOC and blk.dim > 1]
    for _ in range(iters):
        absM = abs(M)
        rn = np.sqrt(np.asarray(absM.max(axis=1).todense()).ravel()) if m else np.ones(0)
        cn = np.sqrt(np.asarray(absM.max(axis=0).todense()).ravel()) if n else np.ones(0)
        rn[rn < 1e-4] = 1.0
        cn[cn < 1e-4] = 1.0
        for sl in groups:
            rn[sl] = np.mean(rn[sl])
        d = 1.0 / rn
        e = 1.0 / cn
        D *= d
        E *= e
        M = sp.diags(d) @ M @ sp.diags(e)
        if np.all(np.abs(1 - rn) < 1e-3) and np.all(np.abs(1 - cn) < 1e-3):
            break
    D = np.clip(D, 1e-4, 1e4)
    E = np.clip(E, 1e-4, 1e4)
    for sl in groups:
        D[sl] = np.mean(D[sl])
    return D, E


class _Workspace:
    def __init__(self, A: SparseMatrix, cones: ConeDescriptor, scaling: bool):
        m, n = A.shape
        self.m, self.n = m, n
        Acsc = A.csc
        if scaling and A.nnz:
            self.D, self.E = _ruiz(Acsc, cones)
        else:
            self.D, self.E = np.ones(m), np.ones(n)
        self.Ahat = (sp.diags(self.D) @ Acsc @ sp.diags(self.E)).tocsc()
        self.AhatT = self.Ahat.T.tocsr()
        K = sp.bmat(
            [[sp.identity(n), self.Ahat.T], [self.Ahat, -sp.identity(m)]], format="csc"
        )
        self.lu = spla.splu(K) if n + m else None
        self.dual_proj = ConeProjector(cones, dual=True)

    def solve_M(self, r: np.ndarray) -> np.ndarray:
        """Solve ``[[I, A^T], [-A, I]] z = r``."""
        if self.lu is None:
            return r.copy()
        rhs = r.copy()
        rhs[self.n :] *= -1.0
        return self.lu.solve(rhs)


_CACHE: "OrderedDict[tuple, _Workspace]" = OrderedDict()
_CACHE_SIZE = 8


def _workspace(A: SparseMatrix, cones: ConeDescriptor, scaling: bool) -> _Workspace:
    h = hashlib.blake2b(digest_size=16)
    for arr in (A.rows, A.cols, A.vals):
        h.update(np.ascontiguousarray(arr).tobytes())
    key = (A.shape, h.digest(), cones, scaling)
    ws = _CACHE.get(key)
    if ws is None:
        ws = _Workspace(A, cones, scaling)
        _CACHE[key] = ws
        if len(_CACHE) > _CACHE_SIZE:
            _CACHE.popitem(last=False)
    else:
        _CACHE.move_to_end(key)
    return ws


# --------------------------------------------------------------------------


class _Anderson:
    """Type-II Anderson acceleration with a Tikhonov-regularized least squares."""

    def __init__(self, dim: int, memory: int):
        self.memory = memory
        self.dZ = np.zeros((memory, dim))
        self.dG = np.zeros((memory, dim))
        self.GtG = np.zeros((memory, memory))
        self.count = 0
        self.prev_z = None
        self.prev_g = None

    def reset(self):
        self.count = 0
        self.prev_z = None
        self.prev_g = None

    def step(self, z: np.ndarray, g: np.ndarray) -> np.ndarray | None:
        if self.memory <= 0:
            return None
        if self.prev_z is not None:
            j = self.count % self.memory
            np.subtract(z, self.prev_z, out=self.dZ[j])
            np.subtract(g, self.prev_g, out=self.dG[j])
            col = self.dG @ self.dG[j]
            self.GtG[j, :] = col
            self.GtG[:, j] = col
            self.count += 1
        self.prev_z = z.copy()
        self.prev_g = g.copy()
        k = min(self.count, self.memory)
        if k == 0:
            return None
        G = self.dG[:k]
        GtG = self.GtG[:k, :k]
        reg = 1e-10 * (np.trace(GtG) + 1e-30)
        try:
            gamma = np.linalg.solve(GtG + reg * np.eye(k), G @ g)
        except np.linalg.LinAlgError:
            self.reset()
            return None
        return z + g - gamma @ (self.dZ[:k] + G)


def solve(
    A: SparseMatrix,
    b,
    c,
    cones: ConeDescriptor,
    settings: SolverSettings | None = None,
    warm: Solution | None = None,
) -> Solution:
    """Solve a cone program with the reference splitting method.

    The balance between primal and dual scaling is adapted at geometrically
    spaced checkpoints when the relative primal and dual residuals drift
    apart by more than a factor ``10``; each adaptation restarts from the
    current (unscaled) iterate.
    """
    settings = settings or SolverSettings()
    b, c = _validate(A, b, c, cones)
    run = _Run(A, b, c, cones, settings)
    if warm is not None:
        run.warm_start(warm.x, warm.y, warm.s)
    return run.iterate()


class _Run:
    def __init__(self, A, b, c, cones, settings: SolverSettings):
        self.A, self.b, self.c, self.cones, self.settings = A, b, c, cones, settings
        self.m, self.n = A.shape
        self.l = self.n + self.m + 1
        self.ws = _workspace(A, cones, settings.scaling_enabled)
        D, E = self.ws.D, self.ws.E
        self.bh0 = D * b
        self.ch0 = E * c
        if settings.scaling_enabled:
            self.sigma = 1.0 / max(np.linalg.norm(self.bh0), 1e-3)
            self.rho0 = 1.0 / max(np.linalg.norm(self.ch0), 1e-3)
        else:
            self.sigma = self.rho0 = 1.0
        self.set_scale(settings.dual_scale)
        self.u = np.zeros(self.l)
        self.v = np.zeros(self.l)
        self.u[-1] = self.v[-1] = 1.0

    def set_scale(self, dual_scale: float):
        self.dual_scale = dual_scale
        self.rho = self.rho0 * dual_scale
        self.h = np.concatenate([self.rho * self.ch0, self.sigma * self.bh0])
        self.Minv_h = self.ws.solve_M(self.h)
        self.denom = 1.0 + self.h @ self.Minv_h

    def warm_start(self, x, y, s):
        n, m = self.n, self.m
        x, y, s = (np.asarray(a, dtype=np.float64) for a in (x, y, s))
        if x.shape != (n,) or y.shape != (m,) or s.shape != (m,):
            return
        D, E = self.ws.D, self.ws.E
        u = np.concatenate([self.sigma * x / E, self.rho * y / D, [1.0]])
        v = np.concatenate([np.zeros(n), self.sigma * D * s, [0.0]])
        if np.all(np.isfinite(u)) and np.all(np.isfinite(v)):
            self.u, self.v = u, v

    def T(self, z: np.ndarray) -> np.ndarray:
        n, m, l = self.n, self.m, self.l
        uu, vv = z[:l], z[l:]
        w = uu + vv
        Minv_w = self.ws.solve_M(w[:-1])
        tau = (w[-1] + self.h @ Minv_w) / self.denom
        ut = np.empty(l)
        ut[:-1] = Minv_w - tau * self.Minv_h
        ut[-1] = tau
        alpha = self.settings.relaxation
        ur = alpha * ut + (1 - alpha) * uu
        un = ur - vv
        out = np.empty(2 * l)
        out[:n] = un[:n]
        self.ws.dual_proj(un[n:-1], out=out[n : n + m])
        out[l - 1] = max(un[-1], 0.0)
        out[l:] = vv - ur + out[:l]
        return out

    def unscale(self, uu, vv, divide=True):
        n, D, E = self.n, self.ws.D, self.ws.E
        if divide:
            tau = uu[-1]
            return (
                E * uu[:n] / (self.sigma * tau),
                D * uu[n:-1] / (self.rho * tau),
                vv[n:-1] / (D * self.sigma * tau),
            )
        return E * uu[:n], D * uu[n:-1], vv[n:-1] / D

    def iterate(self) -> Solution:
        settings = self.settings
        A, b, c, l = self.A, self.b, self.c, self.l
        nb, nc = np.linalg.norm(b), np.linalg.norm(c)
        aa = _Anderson(2 * l, settings.anderson_memory)
        z = np.concatenate([self.u, self.v])
        Tz = self.T(z)
        g = Tz - z
        gnorm = np.linalg.norm(g)
        pri = dua = gap = float("inf")
        best = None
        next_adapt = 100
        it = 0
        for it in range(1, settings.max_iters + 1):
            z_aa = aa.step(z, g)
            accepted = False
            if z_aa is not None and np.all(np.isfinite(z_aa)):
                Tz_aa = self.T(z_aa)
                g_aa = Tz_aa - z_aa
                gn_aa = np.sqrt(g_aa @ g_aa)
                if gn_aa <= gnorm:
                    z, Tz, g, gnorm = z_aa, Tz_aa, g_aa, gn_aa
                    accepted = True
                else:
                    aa.reset()
            if not accepted:
                z = Tz
                Tz = self.T(z)
                g = Tz - z
                gnorm = np.sqrt(g @ g)
            if not np.isfinite(gnorm):
                raise NumericalError(
                    "non-finite iterate in cone solver",
                    {"iteration": it, "primal_residual": pri, "dual_residual": dua, "gap": gap},
                )
            if it % settings.check_every and it != settings.max_iters:
                continue
            uu, vv = Tz[:l], Tz[l:]
            tau, kappa = uu[-1], vv[-1]
            if tau > 1e-12 * max(1.0, kappa):
                x, y, s = self.unscale(uu, vv)
                cx, by = float(c @ x), float(b @ y)
                pri = float(np.linalg.norm(A.matvec(x) + s - b))
                dua = float(np.linalg.norm(A.rmatvec(y) + c))
                gap = abs(cx + by)
                if best is None or max(pri, dua, gap) < best[0]:
                    best = (max(pri, dua, gap), x, y, s, pri, dua, gap)
                if is_converged(pri, dua, gap, b, c, cx, by, settings):
                    return Solution(x, y, s, Status.SOLVED, pri, dua, gap, it,
                                    {"dual_scale": self.dual_scale})
                if it >= next_adapt:
                    next_adapt *= 2
                    ratio = (pri / (1.0 + nb)) / max(dua / (1.0 + nc), 1e-300)
                    if (ratio > 10 or ratio < 0.1) and 1e-6 < self.dual_scale < 1e6:
                        self.set_scale(self.dual_scale / np.sqrt(ratio))
                        self.warm_start(x, y, s)
                        aa.reset()
                        z = np.concatenate([self.u, self.v])
                        Tz = self.T(z)
                        g = Tz - z
                        gnorm = np.linalg.norm(g)
                        log.debug("iteration %d: dual scale -> %g", it, self.dual_scale)
                        continue
            cert = _certificate(A, b, c, uu, vv, self.unscale, settings)
            if cert is not None:
                st, x, y, s = cert
                return Solution(x, y, s, st, float("nan"), float("nan"), float("nan"), it)

        if best is None:
            x, y, s = self.unscale(Tz[:l], Tz[l:], divide=False)
            return Solution(x, y, s, Status.MAX_ITERS, pri, dua, gap, it)
        _, x, y, s, pri, dua, gap = best
        loose = SolverSettings(
            eps_abs=1e3 * settings.eps_abs, eps_rel=1e3 * settings.eps_rel, max_iters=1
        )
        st = (
            Status.INACCURATE
            if is_converged(pri, dua, gap, b, c, c @ x, b @ y, loose)
            else Status.MAX_ITERS
        )
        return Solution(x, y, s, st, pri, dua, gap, it, {"dual_scale": self.dual_scale})


def _certificate(A, b, c, uu, vv, unscale, settings):
    x, y, s = unscale(uu, vv, divide=False)
    eps = settings.eps_infeas
    by = float(b @ y)
    if by < 0:
        if np.linalg.norm(A.rmatvec(y)) <= eps * -by:
            return Status.INFEASIBLE_CERT, x / -by, y / -by, s / -by
    cx = float(c @ x)
    if cx < 0:
        if np.linalg.norm(A.matvec(x) + s) <= eps * -cx:
            return Status.UNBOUNDED_CERT, x / -cx, y / -cx, s / -cx
    return None


def check_solution(A, b, c, cones, sol: Solution, settings: SolverSettings) -> bool:
    """Independent re-check of a ``SOLVED`` claim (residuals plus cone membership)."""
    pri, dua, gap = residuals(A, b, c, cones, sol)
    ok = is_converged(pri, dua, gap, b, c, c @ sol.x, b @ sol.y, settings)
    return (
        ok
        and cone_violation(sol.s, cones) <= 1e-8 * max(1.0, np.abs(sol.s).max(initial=0))
        and cone_violation(sol.y, cones, dual=True) <= 1e-8 * max(1.0, np.abs(sol.y).max(initial=0))
    )


SolveFn = Callable[..., Solution]
