from __future__ import annotations

import numpy as np
import pytest

from conerepair.cones import project_cone, project_dual_cone
from conerepair.problem import ConeDescriptor, ConeKind


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_cones(rng, max_blocks=4, max_dim=5, kinds=(ConeKind.ZERO, ConeKind.NONNEG, ConeKind.SOC)):
    nb = int(rng.integers(1, max_blocks + 1))
    pairs = [(kinds[int(rng.integers(len(kinds)))], int(rng.integers(1, max_dim + 1))) for _ in range(nb)]
    return ConeDescriptor.of(*pairs)


def feasible_instance(rng, m, n, cones, density=0.5):
    """Program with a known primal-dual solution (x, s, y): b = A x + s, c = -A^T y.

    ``s`` and ``y`` are complementary: each NONNEG coordinate is active in
    at most one of them, and each SOC block pairs a boundary point with a
    multiple of its reflection.
    """
    A = rng.standard_normal((m, n)) * (rng.random((m, n)) < density)
    x = rng.standard_normal(n)
    s = np.zeros(m)
    y = np.zeros(m)
    for blk, sl in cones.slices():
        d = blk.dim
        if blk.kind is ConeKind.ZERO:
            y[sl] = rng.standard_normal(d)
        elif blk.kind is ConeKind.NONNEG:
            mask = rng.random(d) < 0.5
            s[sl] = np.where(mask, rng.random(d) + 0.1, 0.0)
            y[sl] = np.where(mask, 0.0, rng.random(d) + 0.1)
        elif d == 1:
            if rng.random() < 0.5:
                s[sl] = rng.random() + 0.1
            else:
                y[sl] = rng.random() + 0.1
        else:
            u = rng.standard_normal(d - 1)
            u /= np.linalg.norm(u)
            choice = rng.integers(3)
            if choice == 0:  # s interior, y = 0
                s[sl] = np.concatenate([[2.0], rng.standard_normal(d - 1) * 0.3])
            elif choice == 1:  # y interior, s = 0
                y[sl] = np.concatenate([[2.0], rng.standard_normal(d - 1) * 0.3])
            else:  # both on the boundary, orthogonal
                a, bb = rng.random() + 0.5, rng.random() + 0.5
                s[sl] = a * np.concatenate([[1.0], u])
                y[sl] = bb * np.concatenate([[1.0], -u])
    b = A @ x + s
    c = -A.T @ y
    return A, b, c, x, s, y
