"""Convex performance metrics with closed-form proximal operators.

A regularizer is a tree over four atoms:

* ``ScaledL1(weights, center)``   -- ``sum_i w_i |theta_i - center_i|``
* ``ScaledL2Sq(weights, center)`` -- ``sum_i w_i (theta_i - center_i)^2``
* ``Box(lower, upper)``           -- indicator of ``lower <= theta <= upper``
* ``Sum(children)``

Zero weights switch a coordinate off. The proximal operator is exact when,
per coordinate, at most one L1 term is active: quadratic terms are merged,
the L1 term soft-thresholds and boxes clip (for a one-dimensional convex
function plus an interval indicator, clipping the unconstrained minimizer is
exact).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .errors import InvalidArgumentError, UnsupportedCompositionError


def _arr(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScaledL1:
    weights: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        w, c = _arr(self.weights, "weights"), _arr(self.center, "center")
        if w.shape != c.shape:
            raise InvalidArgumentError("weights and center must have equal length")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(c)):
            raise InvalidArgumentError("L1 weights must be finite and nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "center", c)

    @property
    def k(self) -> int:
        return self.weights.size

    def __call__(self, theta) -> float:
        return float(self.weights @ np.abs(theta - self.center))


@dataclass(frozen=True, eq=False)
class ScaledL2Sq:
    weights: np.ndarray
    center: np.ndarray

    __post_init__ = ScaledL1.__post_init__
    k = ScaledL1.k

    def __call__(self, theta) -> float:
        return float(self.weights @ (theta - self.center) ** 2)


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, up = _arr(self.lower, "lower"), _arr(self.upper, "upper")
        if lo.shape != up.shape:
            raise InvalidArgumentError("lower and upper must have equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(up)) or np.any(lo > up):
            raise InvalidArgumentError("box bounds must satisfy lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def k(self) -> int:
        return self.lower.size

    def __call__(self, theta) -> float:
        inside = np.all(theta >= self.lower) and np.all(theta <= self.upper)
        return 0.0 if inside else float("inf")


@dataclass(frozen=True, eq=False)
class Sum:
    children: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))

    @property
    def k(self) -> int | None:
        ks = {ch.k for ch in self.children if ch.k is not None}
        if len(ks) > 1:
            raise InvalidArgumentError(f"children disagree on dimension: {sorted(ks)}")
        return ks.pop() if ks else None

    def __call__(self, theta) -> float:
        return float(sum(ch(theta) for ch in self.children))


Regularizer = Union[ScaledL1, ScaledL2Sq, Box, Sum]


def atoms(r: Regularizer) -> Iterator:
    if isinstance(r, Sum):
        for ch in r.children:
            yield from atoms(ch)
    else:
        yield r


def evaluate(r: Regularizer, theta) -> float:
    """Value of ``r``; ``+inf`` exactly when a box bound is violated."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    _check_dim(r, theta.size)
    return r(theta)


def _check_dim(r: Regularizer, k: int):
    rk = r.k
    if rk is not None and rk != k:
        raise InvalidArgumentError(f"regularizer has dimension {rk}, theta has {k}")


@dataclass
class _Separable:
    """Per-coordinate data: ``w1|t - c1| + q (t - d)^2`` on ``[lo, hi]``."""

    w1: np.ndarray
    c1: np.ndarray
    q: np.ndarray
    qd: np.ndarray  # sum of q_j * d_j
    lo: np.ndarray
    hi: np.ndarray


def _separable(r: Regularizer, k: int) -> _Separable:
    sep = _Separable(
        np.zeros(k), np.zeros(k), np.zeros(k), np.zeros(k), np.full(k, -np.inf), np.full(k, np.inf)
    )
    for a in atoms(r):
        if isinstance(a, ScaledL1):
            on = a.weights > 0
            if np.any(on & (sep.w1 > 0)):
                raise UnsupportedCompositionError(
                    "more than one L1 term on a coordinate has no registered closed-form prox"
                )
            sep.w1 = np.where(on, a.weights, sep.w1)
            sep.c1 = np.where(on, a.center, sep.c1)
        elif isinstance(a, ScaledL2Sq):
            sep.q = sep.q + a.weights
            sep.qd = sep.qd + a.weights * a.center
        elif isinstance(a, Box):
            sep.lo = np.maximum(sep.lo, a.lower)
            sep.hi = np.minimum(sep.hi, a.upper)
        else:
            raise UnsupportedCompositionError(f"unknown atom {type(a).__name__}")
    if np.any(sep.lo > sep.hi):
        raise InvalidArgumentError("intersection of boxes is empty")
    return sep


def prox(r: Regularizer, scale: float, theta_tilde) -> np.ndarray:
    """``argmin_theta scale * r(theta) + 0.5 * ||theta - theta_tilde||^2``."""
    if not scale > 0:
        raise InvalidArgumentError(f"prox scale must be positive, got {scale}")
    v = np.asarray(theta_tilde, dtype=np.float64).reshape(-1)
    _check_dim(r, v.size)
    sep = _separable(r, v.size)
    # merge the quadratic: scale*q*(t - d)^2 + 0.5 (t - v)^2 = 0.5 * a (t - v')^2 + const
    a = 1.0 + 2.0 * scale * sep.q
    vq = (v + 2.0 * scale * sep.qd) / a
    thr = scale * sep.w1 / a
    d = vq - sep.c1
    out = sep.c1 + np.sign(d) * np.maximum(np.abs(d) - thr, 0.0)
    return np.clip(out, sep.lo, sep.hi)


def relative_l1(theta0, absolute_weights=None) -> ScaledL1:
    """``sum_i |theta_i - theta0_i| / |theta0_i|``.

    Coordinates with ``theta0_i == 0`` need an entry in ``absolute_weights``
    (a dict or array); division by zero is refused.
    """
    theta0 = np.asarray(theta0, dtype=np.float64).reshape(-1)
    w = np.zeros_like(theta0)
    for i, t in enumerate(theta0):
        if t != 0:
            w[i] = 1.0 / abs(t)
        elif absolute_weights is not None and (
            (isinstance(absolute_weights, dict) and i in absolute_weights)
            or (not isinstance(absolute_weights, dict) and absolute_weights[i] > 0)
        ):
            w[i] = absolute_weights[i]
        else:
            raise InvalidArgumentError(
                f"relative metric undefined at coordinate {i}: theta0[{i}] = 0 and no absolute weight given"
            )
    return ScaledL1(w, theta0)
