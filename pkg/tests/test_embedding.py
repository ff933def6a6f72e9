from __future__ import annotations

import numpy as np
import pytest

from conerepair.cones import cone_violation
from conerepair.embedding import (
    GRAD_ZERO_THRESHOLD,
    build_embedding,
    data_gradients,
    eval_tstar,
    grad_tstar,
    kkt_residual,
)
from conerepair.errors import DegenerateGradientError
from conerepair.generators import spacecraft
from conerepair.problem import ConeDescriptor, ConeKind, make_program
from conerepair.sparse import SparseMatrix

# theta * x = 1 with x free: solvable exactly when theta != 0
THETA_X = make_program([[0.0]], [1.0], [0.0], [("zero", 1)], [([[1.0]], None, None)])
# x >= theta, x <= 0: solvable exactly when theta <= 0
BOUNDS = make_program([[-1.0], [1.0]], [0.0, 0.0], [0.0], [("nonneg", 2)], [(None, [-1.0, 0.0], None)])


def fd(pcp, theta, i, h=1e-5):
    e = np.zeros(pcp.k)
    e[i] = h
    return (eval_tstar(pcp, theta + e).tstar - eval_tstar(pcp, theta - e).tstar) / (2 * h)


def test_build_dimensions_for_theta_x_instance():
    A, b, c = THETA_X.materialize([0.0])
    emb = build_embedding(A, b, c, THETA_X.cones)
    assert emb.cones.blocks[0].kind is ConeKind.SOC
    assert emb.cones.blocks[0].dim == 4
    assert emb.nvars == 1 + 1 + 2 * 1
    # the dual of a zero cone is free: no rows for y
    assert emb.cones.dim == 4 + 1


def test_build_dimensions_unconstrained():
    A = SparseMatrix.zeros(0, 3)
    emb = build_embedding(A, np.zeros(0), np.ones(3), ConeDescriptor(()))
    assert [(blk.kind, blk.dim) for blk in emb.cones.blocks] == [(ConeKind.SOC, 3 + 2)]
    assert emb.nvars == 1 + 3


def test_build_variable_count(rng):
    for m, n in [(1, 1), (4, 2), (7, 5)]:
        cones = ConeDescriptor.of(("nonneg", m))
        emb = build_embedding(SparseMatrix.from_dense(rng.standard_normal((m, n))), np.ones(m), np.ones(n), cones)
        assert emb.nvars == 1 + n + 2 * m


def test_theta_x_family():
    assert eval_tstar(THETA_X, [0.0]).tstar == pytest.approx(1.0, abs=1e-6)
    for th in (-1.0, -0.5, 0.5, 1.0):
        assert eval_tstar(THETA_X, [th]).tstar <= 1e-6


def test_solvable_lp_has_zero_tstar():
    pcp = make_program([[-1.0]], [-1.0], [1.0], [("nonneg", 1)])
    assert eval_tstar(pcp, []).tstar <= 1e-6


def test_witness_invariants(rng):
    for th in (0.5, 1.0, 2.0):
        w = eval_tstar(BOUNDS, [th])
        A, b, c = BOUNDS.materialize([th])
        assert w.tstar >= -1e-10
        assert np.linalg.norm(kkt_residual(A, b, c, w.x, w.y, w.s)) == pytest.approx(w.tstar, abs=1e-7)
        assert cone_violation(w.s, BOUNDS.cones) <= 1e-8
        assert cone_violation(w.y, BOUNDS.cones, dual=True) <= 1e-8


def test_bounds_instance_value_and_gradient():
    # hand minimization gives t*(theta) = theta / sqrt(2) for theta > 0
    w = eval_tstar(BOUNDS, [1.0])
    assert w.tstar == pytest.approx(1 / np.sqrt(2), abs=1e-6)
    g = grad_tstar(BOUNDS, [1.0], w)
    assert g[0] == pytest.approx(fd(BOUNDS, np.array([1.0]), 0), rel=1e-4)


def test_degenerate_gradient_refused():
    w = eval_tstar(BOUNDS, [-1.0])
    assert w.tstar <= GRAD_ZERO_THRESHOLD or w.tstar <= 1e-6
    if w.tstar <= GRAD_ZERO_THRESHOLD:
        with pytest.raises(DegenerateGradientError):
            grad_tstar(BOUNDS, [-1.0], w)
    w0 = eval_tstar(THETA_X, [1.0])
    forced = type(w0)(0.0, w0.x, w0.y, w0.s, w0.solver_status, np.zeros(3))
    with pytest.raises(DegenerateGradientError):
        data_gradients(forced)


def test_warm_resolve_reproduces_value():
    prob = spacecraft()
    cold = eval_tstar(prob.pcp, prob.theta0)
    warm = eval_tstar(prob.pcp, prob.theta0, warm=cold)
    assert warm.tstar == pytest.approx(cold.tstar, abs=1e-8)


def test_spacecraft_start_is_unsolvable_and_gradient_matches_fd():
    prob = spacecraft()
    theta = np.asarray(prob.theta0)
    w = eval_tstar(prob.pcp, theta)
    assert w.tstar > 1.0
    g = grad_tstar(prob.pcp, theta, w)
    for i in range(prob.pcp.k):
        ref = fd(prob.pcp, theta, i)
        # finite differences carry noise of order (solver tolerance) / h
        assert abs(g[i] - ref) <= 1e-3 * abs(ref) + 1e-5
