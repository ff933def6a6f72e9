from __future__ import annotations

import numpy as np
import pytest

from conerepair.cones import cone_violation
from conerepair.errors import InvalidArgumentError
from conerepair.problem import ConeDescriptor
from conerepair.solver import Solution, SolverSettings, Status, check_solution, residuals, solve
from conerepair.sparse import SparseMatrix

from conftest import feasible_instance, random_cones

LP1 = (SparseMatrix.from_dense([[-1.0]]), np.array([-1.0]), np.array([1.0]), ConeDescriptor.of(("nonneg", 1)))


def test_one_dimensional_lp():
    sol = solve(*LP1)
    assert sol.status is Status.SOLVED
    assert sol.x[0] == pytest.approx(1.0, abs=1e-7)
    assert sol.x[0] * 1.0 == pytest.approx(1.0, abs=1e-7)


def test_equality_only():
    sol = solve(SparseMatrix.from_dense([[1.0]]), [1.0], [0.0], ConeDescriptor.of(("zero", 1)))
    assert sol.status is Status.SOLVED
    assert sol.x[0] == pytest.approx(1.0, abs=1e-7)


def test_soc_with_binding_bound():
    # variables (t, u, v): u = 1, v = 1, t <= 2, ||(u, v)|| <= t; minimize -t
    A = np.vstack([[0, 1, 0], [0, 0, 1], [1, 0, 0], -np.eye(3)])
    b = np.array([1.0, 1.0, 2.0, 0.0, 0.0, 0.0])
    c = np.array([-1.0, 0.0, 0.0])
    cones = ConeDescriptor.of(("zero", 2), ("nonneg", 1), ("soc", 3))
    sol = solve(SparseMatrix.from_dense(A), b, c, cones)
    assert sol.status is Status.SOLVED
    assert sol.x == pytest.approx([2.0, 1.0, 1.0], abs=1e-6)
    assert c @ sol.x == pytest.approx(-2.0, abs=1e-6)


def test_residual_examples(rng):
    A, b, c, cones = LP1
    exact = Solution(np.array([1.0]), np.array([1.0]), np.array([0.0]), Status.SOLVED)
    assert residuals(A, b, c, cones, exact) == (0.0, 0.0, 0.0)
    zeros = Solution(np.zeros(1), np.zeros(1), np.zeros(1), Status.SOLVED)
    assert residuals(A, b, c, cones, zeros) == (1.0, 1.0, 0.0)
    for _ in range(20):
        Ad = rng.standard_normal((4, 3))
        bb, cc = rng.standard_normal(4), rng.standard_normal(3)
        x, y, s = rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(4)
        got = residuals(SparseMatrix.from_dense(Ad), bb, cc, ConeDescriptor.of(("nonneg", 4)),
                        Solution(x, y, s, Status.SOLVED))
        ref = (np.linalg.norm(Ad @ x + s - bb), np.linalg.norm(Ad.T @ y + cc), abs(cc @ x + bb @ y))
        assert np.allclose(got, ref, rtol=1e-12, atol=1e-14)


def test_infeasibility_certificate():
    A = SparseMatrix.from_dense([[-1.0], [1.0]])
    sol = solve(A, [-1.0, 0.0], [0.0], ConeDescriptor.of(("nonneg", 2)))
    assert sol.status is Status.INFEASIBLE_CERT
    # y >= 0, A^T y = 0, b^T y < 0
    assert np.all(sol.y >= -1e-9)
    assert abs(A.rmatvec(sol.y)[0]) <= 1e-6
    assert np.dot([-1.0, 0.0], sol.y) < 0


def test_unboundedness_certificate():
    # minimize x s.t. x <= 0
    A = SparseMatrix.from_dense([[1.0]])
    sol = solve(A, [0.0], [1.0], ConeDescriptor.of(("nonneg", 1)))
    assert sol.status is Status.UNBOUNDED_CERT
    assert sol.x[0] < 0


def test_invalid_input():
    A = SparseMatrix.from_dense([[1.0]])
    with pytest.raises(InvalidArgumentError):
        solve(A, [1.0, 2.0], [0.0], ConeDescriptor.of(("zero", 1)))
    with pytest.raises(InvalidArgumentError):
        solve(A, [1.0], [0.0], ConeDescriptor.of(("zero", 2)))
    with pytest.raises(InvalidArgumentError):
        solve(A, [np.nan], [0.0], ConeDescriptor.of(("zero", 1)))
    with pytest.raises(InvalidArgumentError):
        SolverSettings(eps_abs=0.0)


def test_random_feasible_instances(rng):
    for _ in range(25):
        m, n = int(rng.integers(3, 20)), int(rng.integers(2, 12))
        cones = random_cones(rng, max_dim=max(1, m // 2))
        A, b, c, x, s, y = feasible_instance(rng, cones.dim, n, cones)
        sol = solve(SparseMatrix.from_dense(A), b, c, cones)
        assert sol.status is Status.SOLVED
        assert check_solution(SparseMatrix.from_dense(A), b, c, cones, sol, SolverSettings(eps_abs=1e-7, eps_rel=1e-7))
        assert c @ sol.x == pytest.approx(c @ x, rel=1e-5, abs=1e-6)


def test_solved_implies_small_residuals(rng):
    settings = SolverSettings()
    for _ in range(10):
        cones = random_cones(rng)
        A, b, c, *_ = feasible_instance(rng, cones.dim, 5, cones)
        As = SparseMatrix.from_dense(A)
        sol = solve(As, b, c, cones, settings)
        if sol.status is Status.SOLVED:
            pri, dua, gap = residuals(As, b, c, cones, sol)
            assert pri <= 10 * (settings.eps_abs + settings.eps_rel * np.linalg.norm(b))
            assert dua <= 10 * (settings.eps_abs + settings.eps_rel * np.linalg.norm(c))
            assert cone_violation(sol.s, cones) <= 1e-8 * max(1, np.abs(sol.s).max())


def test_warm_start_is_cheap(rng):
    cones = ConeDescriptor.of(("zero", 3), ("nonneg", 10), ("soc", 4), ("soc", 5))
    A, b, c, *_ = feasible_instance(rng, cones.dim, 12, cones)
    As = SparseMatrix.from_dense(A)
    cold = solve(As, b, c, cones)
    warm = solve(As, b, c, cones, warm=cold)
    assert cold.status is Status.SOLVED and warm.status is Status.SOLVED
    assert warm.iterations <= 0.1 * cold.iterations
