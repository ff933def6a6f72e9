"""Euclidean projections onto zero, nonnegative and second-order cones."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .problem import ConeDescriptor, ConeKind

# reported membership tolerance; matches the default solver accuracy regime
MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True)
class ConeBlockView:
    kind: ConeKind
    segment: np.ndarray


def block_views(v, cones: ConeDescriptor) -> list[ConeBlockView]:
    v = _check(v, cones)
    return [ConeBlockView(b.kind, v[sl]) for b, sl in cones.slices()]


def _check(v, cones: ConeDescriptor) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != cones.dim:
        raise InvalidArgumentError(f"vector length {v.size} != cone dimension {cones.dim}")
    return v


def project_soc_batch(T: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project rows ``(T[i], X[i])`` onto the second-order cone."""
    nx = np.sqrt(np.einsum("ij,ij->i", X, X))
    # per-block multipliers: inside -> (1, 1); polar -> (0, 0); else the
    # boundary point ((t + |x|)/2) * (1, x/|x|)
    a = 0.5 * (T + nx)
    inside = nx <= T
    polar = nx <= -T
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = np.where(inside, 1.0, np.where(polar, 0.0, a / nx))
    t_out = np.where(inside, T, np.where(polar, 0.0, a))
    return t_out, xs[:, None] * X


def project_soc(v: np.ndarray) -> np.ndarray:
    """Projection of a single SOC block ``(t, x)``."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 1:
        return np.maximum(v, 0.0)
    t, x = project_soc_batch(v[:1], v[None, 1:])
    return np.concatenate([t, x[0]])


class ConeProjector:
    """Precompiled projector for a fixed descriptor.

    SOC blocks of equal dimension are projected together through fancy
    indexing, which keeps the per-iteration cost of the solver flat in the
    number of blocks.
    """

    def __init__(self, cones: ConeDescriptor, dual: bool = False):
        self.cones = cones
        self.dual = dual
        self.dim = cones.dim
        zero, nonneg = [], []
        soc: dict[int, list[int]] = {}
        for b, sl in cones.slices():
            idx = range(sl.start, sl.stop)
            if b.kind is ConeKind.ZERO:
                zero.extend(idx)
            elif b.kind is ConeKind.NONNEG or b.dim == 1:
                nonneg.extend(idx)
            else:
                soc.setdefault(b.dim, []).append(sl.start)
        self.zero = np.array(zero, dtype=np.int64)
        self.nonneg = np.array(nonneg, dtype=np.int64)
        self.soc = [
            (np.array(starts)[:, None] + np.arange(d)[None, :]) for d, starts in sorted(soc.items())
        ]

    def __call__(self, v: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.array(v, dtype=np.float64, copy=True)
        else:
            out[:] = v
        if self.zero.size and not self.dual:
            out[self.zero] = 0.0
        if self.nonneg.size:
            out[self.nonneg] = np.maximum(out[self.nonneg], 0.0)
        for idx in self.soc:
            block = out[idx]
            t, x = project_soc_batch(block[:, 0], block[:, 1:])
            out[idx[:, 0]] = t
            out[idx[:, 1:]] = x
        return out


def project_cone(v, cones: ConeDescriptor) -> np.ndarray:
    """Euclidean projection onto ``K``."""
    return ConeProjector(cones)(_check(v, cones))


def project_dual_cone(v, cones: ConeDescriptor) -> np.ndarray:
    """Euclidean projection onto ``K*`` (zero blocks are free in the dual)."""
    return ConeProjector(cones, dual=True)(_check(v, cones))


def cone_violation(v, cones: ConeDescriptor, dual: bool = False) -> float:
    """Largest violation of membership in ``K`` (or ``K*``); 0 means inside."""
    v = _check(v, cones)
    worst = 0.0
    for b, sl in cones.slices():
        seg = v[sl]
        if b.kind is ConeKind.ZERO:
            if not dual:
                worst = max(worst, float(np.max(np.abs(seg))))
        elif b.kind is ConeKind.NONNEG or b.dim == 1:
            worst = max(worst, float(np.max(-seg)))
        else:
            worst = max(worst, float(np.linalg.norm(seg[1:]) - seg[0]))
    return worst


def in_cone(v, cones: ConeDescriptor, tol: float = MEMBERSHIP_TOL, dual: bool = False) -> bool:
    return cone_violation(v, cones, dual=dual) <= tol
