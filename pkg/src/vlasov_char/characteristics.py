"""Characteristic coordinate of the n-th chain equation and phase-trajectory propagation.

A point of the n-th order phase space holds the coordinate and its first
``n - 1`` time derivatives for every spatial axis.  The characteristic

    eta_n = sum_k (-1)^k t^k / k! * r^(k)

is conserved along truncated Taylor trajectories, which is what turns the
n-th chain equation into a first-order continuity equation in ``eta_n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_ORDER = 20


def _check_order(n: int) -> None:
    if int(n) != n or n < 1:
        raise ValueError(f"order must be a positive integer, got {n!r}")
    if n > MAX_ORDER:
        raise ValueError(f"order {n} exceeds the supported maximum {MAX_ORDER}")


def _taylor_coefficients(n: int, t):
    """Return ``[t^k / k! for k < n]`` built by a running product.

    ``t`` may be an array; the result then has shape ``(n,) + t.shape``.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty((n,) + t.shape)
    term = np.ones_like(t)
    for k in range(n):
        if k:
            term = term * t / k
        out[k] = term
    return out


@dataclass(frozen=True)
class PhasePoint:
    """Point of the order-``n`` phase space.

    ``derivs[k, axis]`` is the k-th time derivative of the coordinate along
    ``axis``; ``k = 0`` is the position itself.
    """

    derivs: np.ndarray

    def __post_init__(self):
        d = np.array(self.derivs, dtype=float)
        if d.ndim == 1:
            d = d[:, None]
        if d.ndim != 2:
            raise ValueError("derivs must have shape (order, dimension)")
        _check_order(d.shape[0])
        if d.shape[1] not in (1, 3):
            raise ValueError(f"dimension must be 1 or 3, got {d.shape[1]}")
        d.setflags(write=False)
        object.__setattr__(self, "derivs", d)

    @classmethod
    def from_values(cls, *values) -> "PhasePoint":
        """1-D point from ``(x, v, vdot, ...)``."""
        return cls(np.asarray(values, dtype=float)[:, None])

    @property
    def order(self) -> int:
        return self.derivs.shape[0]

    @property
    def dimension(self) -> int:
        return self.derivs.shape[1]


@dataclass(frozen=True)
class TauWeights:
    order: int
    weights: np.ndarray
    time: float


@dataclass(frozen=True)
class TaylorPropagator:
    """Truncated Taylor shift matrix ``M[i, j] = t^(j-i) / (j-i)!`` for ``j >= i``."""

    size: int
    time: float
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _check_order(self.size)
        coef = _taylor_coefficients(self.size, self.time)
        m = np.zeros((self.size, self.size))
        for i in range(self.size):
            m[i, i:] = coef[: self.size - i]
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: "TaylorPropagator") -> "TaylorPropagator":
        if not isinstance(other, TaylorPropagator):
            return NotImplemented
        if other.size != self.size:
            raise ValueError("propagator sizes differ")
        return TaylorPropagator(self.size, self.time + other.time)


def tau(k: int, t):
    """Time weight ``(-1)^(k+1) t^k / k!``.

    ``tau(n, t)`` is also the time parameter of the reduced first-order
    equation for the order-``n`` chain member.
    """
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a non-negative integer, got {k!r}")
    k = int(k)
    coef = _taylor_coefficients(k + 1, t)[k]
    sign = -1.0 if k % 2 == 0 else 1.0
    return sign * coef if np.ndim(coef) else float(sign * coef)


def hyperplane_normal(n: int, t: float) -> TauWeights:
    """Normal ``(tau_0(t), ..., tau_{n-1}(t))`` of the level sets of ``eta_n`` at time ``t``.

    The normal does not depend on the level value, so all level
    hyperplanes at a given time are parallel.
    """
    _check_order(n)
    w = np.array([tau(k, t) for k in range(n)], dtype=float)
    w.setflags(write=False)
    return TauWeights(order=n, weights=w, time=float(t))


def eta_array(derivs, t):
    """Characteristic for stacked derivative arrays.

    ``derivs`` has the derivative order on axis 0; the remaining axes are
    broadcast against ``t``.
    """
    derivs = np.asarray(derivs, dtype=float)
    n = derivs.shape[0]
    _check_order(n)
    t = np.asarray(t, dtype=float)
    coef = _taylor_coefficients(n, -t)
    pad = max(derivs.ndim - 1 - t.ndim, 0)
    coef = coef.reshape((n,) + (1,) * pad + t.shape)
    return np.sum(coef * derivs, axis=0)


def eta(p: PhasePoint, t: float) -> np.ndarray:
    """Characteristic coordinate of ``p`` at time ``t``, one value per axis."""
    return eta_array(p.derivs, float(t))


def propagate_array(derivs, t) -> np.ndarray:
    """Shift derivative stacks (order on axis 0) along their truncated Taylor trajectory.

    ``t`` is a scalar or an array broadcast against the trailing axes of
    ``derivs``, so many trajectories can be moved by different times at once.
    """
    derivs = np.asarray(derivs, dtype=float)
    n = derivs.shape[0]
    if np.ndim(t) == 0:
        m = TaylorPropagator(n, float(t)).matrix
        return np.tensordot(m, derivs, axes=(1, 0))
    _check_order(n)
    t = np.asarray(t, dtype=float)
    coef = _taylor_coefficients(n, t)
    pad = max(derivs.ndim - 1 - t.ndim, 0)
    coef = coef.reshape((n,) + (1,) * pad + t.shape)
    out = np.zeros(np.broadcast_shapes(derivs.shape, coef.shape))
    for i in range(n):
        for j in range(i, n):
            out[i] += coef[j - i] * derivs[j]
    return out


def propagate(p: PhasePoint, t: float) -> PhasePoint:
    """Move ``p`` along its trajectory for time ``t``.

    Derivatives of order ``>= p.order`` are taken to be zero, the only
    truncation under which ``eta_n`` is exactly conserved.
    """
    return PhasePoint(propagate_array(p.derivs, t))
