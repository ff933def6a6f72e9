"""Cone-form encodings of the spacecraft landing and arbitrage examples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .problem import ConeBlock, ConeDescriptor, ConeKind, ParamConeProgram, ParamIncrement
from .regularizers import Box, Regularizer, Sum, relative_l1
from .sparse import SparseMatrix

EXAMPLE_R0 = np.array(
    [
        [0.05, 1.74, -0.88],
        [0.08, 0.45, -1.02],
        [0.18, -0.31, 1.29],
        [0.9, -1.17, 0.27],
        [-0.93, 0.17, 2.39],
    ]
)


@dataclass(frozen=True, eq=False)
class RepairProblem:
    """A parametrized program together with its starting point and metric."""

    pcp: ParamConeProgram
    theta0: np.ndarray
    regularizer: Regularizer
    names: tuple[str, ...] = ()


class _Rows:
    """Incremental builder for ``A x + s = b`` rows with per-parameter parts."""

    def __init__(self, n: int, k: int):
        self.n, self.k = n, k
        self.m = 0
        self.base = ([], [], [])
        self.inc = [([], [], []) for _ in range(k)]
        self.b0: list[float] = []
        self.bk = [dict() for _ in range(k)]
        self.blocks: list[ConeBlock] = []

    def add(self, kind: ConeKind, rows: list[dict], rhs, param_rows=None, param_rhs=None):
        """``rows[j]`` maps column -> coefficient; ``param_rows[p][j]`` likewise."""
        for j, row in enumerate(rows):
            r = self.m + j
            for col, val in row.items():
                self.base[0].append(r)
                self.base[1].append(col)
                self.base[2].append(val)
            self.b0.append(float(rhs[j]))
        for p, prows in (param_rows or {}).items():
            for j, row in enumerate(prows):
                for col, val in row.items():
                    self.inc[p][0].append(self.m + j)
                    self.inc[p][1].append(col)
                    self.inc[p][2].append(val)
        for p, vals in (param_rhs or {}).items():
            for j, val in enumerate(vals):
                if val:
                    self.bk[p][self.m + j] = float(val)
        self.blocks.append(ConeBlock(kind, len(rows)))
        self.m += len(rows)

    def build(self, c0=None, c_inc=None) -> ParamConeProgram:
        m, n = self.m, self.n
        A0 = SparseMatrix(m, n, *self.base)
        params = []
        for p in range(self.k):
            A = SparseMatrix(m, n, *self.inc[p]) if self.inc[p][0] else None
            b = None
            if self.bk[p]:
                b = np.zeros(m)
                for r, val in self.bk[p].items():
                    b[r] = val
            c = None if c_inc is None else c_inc[p]
            params.append(ParamIncrement(A, b, c))
        c0 = np.zeros(n) if c0 is None else c0
        return ParamConeProgram(A0, np.array(self.b0), c0, ConeDescriptor(tuple(self.blocks)), tuple(params))


def spacecraft(
    T: float = 10.0,
    h: float = 1.0,
    g: float = 9.8,
    x_init=(10.0, 10.0, 50.0),
    v_init=(10.0, -10.0, -10.0),
    gamma: float = 1.0,
    theta0=(12.0, 200.0, 50.0, 0.5),
    min_mass: float = 9.0,
    gravity: str = "force",
) -> RepairProblem:
    """Feasibility of a gimbaled-thruster landing, ``theta = (m, M_fuel, F_max, alpha)``.

    Time is discretized into ``H = T/h + 1`` samples. Variables are positions,
    velocities and thrusts per sample plus a fuel epigraph ``u_k >= ||f_k||``.
    Dynamics rows (``k = 1..H-1``)::

        x_{k+1} = x_k + (h/2)(v_{k+1} + v_k)
        m v_{k+1} = m v_k + h f_k - h G e3

    With ``gravity="force"`` the gravity term is the constant force
    ``G = g`` (mass enters only ``A``); this model reproduces the published
    repaired design. ``gravity="acceleration"`` uses ``G = m g``, so mass
    also enters ``b``.

    The metric is the sum of relative changes of all four parameters plus
    the hard constraint ``m >= min_mass``.
    """
    if gravity not in ("force", "acceleration"):
        raise InvalidArgumentError("gravity must be 'force' or 'acceleration'")
    H = int(round(T / h)) + 1
    if H < 2:
        raise InvalidArgumentError("need at least two time samples")
    X = lambda k, i: 3 * k + i
    V = lambda k, i: 3 * H + 3 * k + i
    F = lambda k, i: 6 * H + 3 * k + i
    U = lambda k: 9 * H + k
    n = 10 * H
    MASS, FUEL, FMAX, ALPHA = range(4)
    rows = _Rows(n, 4)

    # boundary conditions
    bc = [{X(0, i): 1.0} for i in range(3)] + [{V(0, i): 1.0} for i in range(3)]
    bc += [{X(H - 1, i): 1.0} for i in range(3)] + [{V(H - 1, i): 1.0} for i in range(3)]
    rows.add(ConeKind.ZERO, bc, list(x_init) + list(v_init) + [0.0] * 6)
    # position updates
    pos = []
    for k in range(H - 1):
        for i in range(3):
            pos.append({X(k + 1, i): 1.0, X(k, i): -1.0, V(k + 1, i): -h / 2, V(k, i): -h / 2})
    rows.add(ConeKind.ZERO, pos, np.zeros(len(pos)))
    # velocity updates: m (v_{k+1} - v_k) - h f_k = -h G e3
    vel, vel_m, rhs, rhs_m = [], [], [], []
    for k in range(H - 1):
        for i in range(3):
            vel.append({F(k, i): -h})
            vel_m.append({V(k + 1, i): 1.0, V(k, i): -1.0})
            drop = -h * g if i == 2 else 0.0
            rhs.append(drop if gravity == "force" else 0.0)
            rhs_m.append(drop if gravity == "acceleration" else 0.0)
    rows.add(ConeKind.ZERO, vel, rhs, {MASS: vel_m}, {MASS: rhs_m})
    # fuel budget: M_fuel - sum h gamma u_k >= 0
    rows.add(ConeKind.NONNEG, [{U(k): h * gamma for k in range(H)}], [0.0], param_rhs={FUEL: [1.0]})
    for k in range(H):
        # thrust limit (F_max, f_k) in SOC
        rows.add(
            ConeKind.SOC,
            [{}] + [{F(k, i): -1.0} for i in range(3)],
            np.zeros(4),
            param_rhs={FMAX: [1.0, 0, 0, 0]},
        )
        # fuel epigraph (u_k, f_k) in SOC
        rows.add(ConeKind.SOC, [{U(k): -1.0}] + [{F(k, i): -1.0} for i in range(3)], np.zeros(4))
        # gimbal (f_k3, alpha f_k1, alpha f_k2) in SOC
        rows.add(
            ConeKind.SOC,
            [{F(k, 2): -1.0}, {}, {}],
            np.zeros(3),
            param_rows={ALPHA: [{}, {F(k, 0): -1.0}, {F(k, 1): -1.0}]},
        )
    pcp = rows.build()
    theta0 = np.array(theta0, dtype=np.float64)
    lower = np.full(4, -np.inf)
    lower[MASS] = min_mass
    reg = Sum((relative_l1(theta0), Box(lower, np.full(4, np.inf))))
    return RepairProblem(pcp, theta0, reg, ("mass", "fuel", "thrust_max", "gimbal"))


def arbitrage(R0=EXAMPLE_R0, zero_weight: float | None = None) -> RepairProblem:
    """Arbitrage check ``maximize 1^T R w s.t. R w >= 0, w >= 0`` with ``theta = vec(R)``.

    ``theta`` stacks ``R`` row by row (``theta[i*n + j] = R[i, j]``). The
    program is encoded as ``minimize -1^T R w``; it is unbounded exactly
    when an arbitrage opportunity exists. The metric is
    ``||(R - R0) / R0||_1`` (elementwise division). Zero entries of ``R0``
    are refused unless ``zero_weight`` gives an absolute weight for them.
    """
    R0 = np.atleast_2d(np.asarray(R0, dtype=np.float64))
    m, n = R0.shape
    zeros = np.argwhere(R0 == 0)
    if zeros.size and zero_weight is None:
        i, j = zeros[0]
        raise InvalidArgumentError(f"R0[{i}, {j}] is zero; the relative metric needs nonzero entries")
    rows = _Rows(n, m * n)
    rows.add(
        ConeKind.NONNEG,
        [{} for _ in range(m)],
        np.zeros(m),
        {i * n + j: [({j: -1.0} if r == i else {}) for r in range(m)] for i in range(m) for j in range(n)},
    )
    rows.add(ConeKind.NONNEG, [{j: -1.0} for j in range(n)], np.zeros(n))
    c_inc = []
    for i in range(m):
        for j in range(n):
            e = np.zeros(n)
            e[j] = -1.0
            c_inc.append(e)
    pcp = rows.build(np.zeros(n), c_inc)
    names = tuple(f"R[{i},{j}]" for i in range(m) for j in range(n))
    absolute = None if zero_weight is None else np.full(R0.size, float(zero_weight))
    return RepairProblem(pcp, R0.ravel().copy(), relative_l1(R0.ravel(), absolute), names)


def theta_to_matrix(theta, shape) -> np.ndarray:
    return np.asarray(theta, dtype=np.float64).reshape(shape)
