"""Phase-space distributions built from characteristic solutions, and their marginals.

The order-``n`` distribution is a function of ``(eta_n, tau_n)`` only, spread
uniformly over a box of widths ``Delta a^(l)`` in the derivative
directions ``l = 1 .. n-1``.  For ``n = 2`` the velocity marginal has a
closed form that depends on which of four regions of the ``(x, t)`` plane
the point falls in.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .characteristics import PhasePoint, eta, eta_array, tau
from .well_solutions import DENSITY_FLOOR, ModeConstants, ThetaSolution, density_theta, flux_theta


@dataclass(frozen=True)
class PhaseBox:
    """Widths ``(a, adot, ...)`` of the phase box; ``widths[0]`` is the well width."""

    widths: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in self.widths)
        if not w or any(not (np.isfinite(x) and x > 0) for x in w):
            raise ValueError(f"box widths must be positive, got {self.widths!r}")
        object.__setattr__(self, "widths", w)

    @property
    def order(self) -> int:
        return len(self.widths)

    @property
    def a(self) -> float:
        return self.widths[0]

    @property
    def adot(self) -> float:
        return self.widths[1]

    @property
    def derivative_volume(self) -> float:
        """Product of the widths in the derivative directions ``l >= 1``."""
        return float(np.prod(self.widths[1:]))


class Region(enum.IntEnum):
    OUTSIDE = 0
    B1 = 1
    B2 = 2
    B3 = 3
    B4 = 4


@dataclass(frozen=True)
class Branch:
    """Region of the ``(x, t)`` plane and the velocity limits that apply there."""

    tag: Region
    vlimits: tuple


@dataclass(frozen=True)
class MarginalResult:
    density: float
    mean_flux: float


def _check_box(box: PhaseBox, order: int):
    if box.order != order:
        raise ValueError(f"box has {box.order} widths but the phase point has order {order}")


def _check_mode(mode: ModeConstants, box: PhaseBox):
    if abs(mode.lam * box.a - math.pi * mode.mu) > 1e-9 * math.pi * mode.mu:
        raise ValueError("mode wavenumber does not match box width a")


def _in_box(derivs, box: PhaseBox):
    ok = np.ones(np.shape(derivs)[1:], dtype=bool)
    for l in range(1, box.order):
        ok &= (derivs[l] >= 0) & (derivs[l] <= box.widths[l])
    return ok


def f_n_stationary_array(derivs, t, mode: ModeConstants, box: PhaseBox):
    """Vectorized stationary lift; ``derivs`` has the derivative order on axis 0."""
    derivs = np.asarray(derivs, dtype=float)
    _check_box(box, derivs.shape[0])
    _check_mode(mode, box)
    e = eta_array(derivs, t)
    inside = (e >= 0) & (e <= box.a) & _in_box(derivs, box)
    val = 2.0 / (box.a * box.derivative_volume) * np.sin(mode.lam * e) ** 2
    return np.where(inside, val, 0.0)


def f_n_stationary(p: PhasePoint, t: float, mode: ModeConstants, box: PhaseBox) -> float:
    """Order-``n`` lift of a stationary mode, ``2 / prod(widths) * sin^2(lambda eta_n)``.

    Zero outside the characteristic parallelepiped.
    """
    if p.dimension != 1:
        raise ValueError("phase-space lifts are one-dimensional")
    return float(f_n_stationary_array(p.derivs[:, 0], t, mode, box))


def f_n_theta_array(derivs, t, sol: ThetaSolution, box: PhaseBox):
    derivs = np.asarray(derivs, dtype=float)
    n = derivs.shape[0]
    _check_box(box, n)
    _check_mode(sol.mode, box)
    e, tn = np.broadcast_arrays(eta_array(derivs, t), tau(n, t))
    inside = (e >= 0) & (e <= box.a) & _in_box(derivs, box)
    out = np.zeros(e.shape)
    if np.any(inside):
        out[inside] = density_theta(e[inside], tn[inside], sol) / box.derivative_volume
    return out


def f_n_theta(p: PhasePoint, t: float, sol: ThetaSolution, box: PhaseBox) -> float:
    """Lift of the comb solution: ``F(eta_n(p, t), tau_n(t)) / prod_{l>=1} widths``."""
    if p.dimension != 1:
        raise ValueError("phase-space lifts are one-dimensional")
    return float(f_n_theta_array(p.derivs[:, 0], t, sol, box))


def lifted_flux_array(derivs, t, sol: ThetaSolution):
    """Mean top-order flux on phase space, ``u(eta_n(xi, t), tau_n(t))``; NaN outside the well."""
    derivs = np.asarray(derivs, dtype=float)
    n = derivs.shape[0]
    e, tn = np.broadcast_arrays(eta_array(derivs, t), tau(n, t))
    inside = (e >= 0) & (e <= sol.params.a)
    out = np.full(e.shape, np.nan)
    if np.any(inside):
        out[inside] = flux_theta(e[inside], tn[inside], sol)
    return out


# ---------------------------------------------------------------------------
# n = 2 velocity marginal


def _regions(x, t, a, adot):
    """Region codes plus width ``w = v2 - v1``, ``S = xbar1 + xbar2``, ``D = w t`` and ``v_c``."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    at = adot * t
    left = x < a
    early = x < at
    support = (x >= 0) & (x < at + a)
    corner = (x == a) & (x == at)  # all four regions meet; the lowest-numbered one wins
    code = np.select(
        [~support, (left & early) | corner, left & ~early, ~left & early],
        [Region.OUTSIDE, Region.B1, Region.B2, Region.B3],
        default=Region.B4,
    ).astype(int)
    with np.errstate(divide="ignore", invalid="ignore"):
        v1 = np.where(left | corner, 0.0, (x - a) / t)
        v2 = np.where(early | corner, x / t, adot)
        D = np.select([code == 1, code == 2, code == 3], [x, at, np.full_like(x, a)], default=at + a - x)
        S = np.select([code == 1, code == 2, code == 3], [x, 2 * x - at, np.full_like(x, a)], default=x + a - at)
        w = np.where(code == 2, adot, D / t)
    w = np.where(code == 0, 0.0, w)
    return code, v1, v2, w, S, D


def _one_minus_sinc(y):
    y = np.abs(y)
    small = y < 0.1
    y2 = y * y
    series = y2 / 6 * (1 - y2 / 20 * (1 - y2 / 42 * (1 - y2 / 72)))
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = 1 - np.sin(y) / y
    return np.where(small, series, direct)


def _sinc(y):
    return np.sinc(y / math.pi)


def _g(y):
    """``(sin y - y cos y) / y^3``, regular at zero."""
    y2 = y * y
    series = (1 / 3) - y2 / 30 + y2 * y2 / 840 - y2**3 / 45360 + y2**4 / 3991680
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (np.sin(y) - y * np.cos(y)) / (y * y2)
    return np.where(np.abs(y) < 0.5, series, direct)


def _bracket(lam, S, D):
    # 1 - cos(lam S) sinc(lam D) written without cancellation
    return 2 * np.sin(lam * S / 2) ** 2 + np.cos(lam * S) * _one_minus_sinc(lam * D)


def classify_region(x: float, t: float, box: PhaseBox) -> Branch:
    """Region of ``(x, t)`` and its velocity limits ``(v1, v2)``.

    Boundaries are half-open as ``x < a`` / ``x >= a`` and
    ``x < adot t`` / ``x >= adot t``; the corner ``x = a = adot t`` goes to
    B1.  At ``t = 0`` the whole well is region B2 with limits ``(0, adot)``.
    """
    code, v1, v2, *_ = _regions(x, t, box.a, box.adot)
    code = Region(int(code))
    if code is Region.OUTSIDE:
        return Branch(code, (0.0, 0.0))
    return Branch(code, (float(v1), float(v2)))


def marginal_density(x, t, mode: ModeConstants, box: PhaseBox):
    """Coordinate density of the ``n = 2`` stationary lift.

    Evaluated as ``w / (adot a) * [1 - cos(lambda S) sinc(lambda D)]`` with
    ``w = v2 - v1``, ``D = w t`` and ``S = 2x - (v1 + v2) t``, which has no
    ``1/t`` singularity.
    """
    _check_box(box, 2)
    _check_mode(mode, box)
    code, _, _, w, S, D = _regions(x, t, box.a, box.adot)
    out = np.where(code == 0, 0.0, w / (box.adot * box.a) * _bracket(mode.lam, S, D))
    return out if out.ndim else float(out)


def marginal_flux(x, t, mode: ModeConstants, box: PhaseBox, floor: float = DENSITY_FLOOR):
    """Mean velocity of the ``n = 2`` stationary lift.

    ``<v> = v_c - lambda t w^2 sin(lambda S) g(lambda D) / (2 B)`` where
    ``v_c`` is the midpoint of the velocity window, ``B`` the density
    bracket and ``g(y) = (sin y - y cos y) / y^3``.  NaN where the density
    is below ``floor``.
    """
    _check_box(box, 2)
    _check_mode(mode, box)
    lam = mode.lam
    code, v1, v2, w, S, D = _regions(x, t, box.a, box.adot)
    t = np.broadcast_to(np.asarray(t, dtype=float), code.shape)
    bracket = _bracket(lam, S, D)
    dens = w / (box.adot * box.a) * bracket
    with np.errstate(divide="ignore", invalid="ignore"):
        vc = np.where(t > 0, 0.5 * (v1 + v2), 0.5 * box.adot)
        corr = lam * t * w * w * np.sin(lam * S) * _g(lam * D) / (2 * bracket)
        out = np.where((code != 0) & (dens > floor), vc - np.where(t > 0, corr, 0.0), np.nan)
    return out if out.ndim else float(out)


def marginal(x: float, t: float, mode: ModeConstants, box: PhaseBox) -> MarginalResult:
    return MarginalResult(marginal_density(x, t, mode, box), marginal_flux(x, t, mode, box))


# ---------------------------------------------------------------------------
# general one-step marginalization


_GL_CACHE: dict = {}


def gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def marginalize_general_array(
    F: Callable, derivs_lower, t: float, box: PhaseBox, nodes: int = 64
):
    """Integrate the order-``n`` lift of ``F`` over its top derivative.

    ``F(eta, tau)`` is a characteristic density normalized on ``[0, a]``.
    ``derivs_lower`` holds the order ``n - 1`` coordinates with the order on
    axis 0 (any trailing shape).  With ``eta_{n-1}`` the characteristic of
    the lower point, the top derivative sweeps ``eta_n`` over
    ``[eta_{n-1} - tau_{n-1} Delta, eta_{n-1}]`` and

        f_{n-1} = 1 / (|tau_{n-1}| prod_{l>=1} Delta^(l)) * int F(eta', tau_n) d eta'.

    The interval is clipped to the well before Gauss-Legendre quadrature.
    """
    derivs_lower = np.asarray(derivs_lower, dtype=float)
    n = derivs_lower.shape[0] + 1
    if n < 2:
        raise ValueError("need n >= 2")
    _check_box(box, n)
    a = box.a
    width = box.widths[n - 1]
    tn = tau(n, t)
    tl = tau(n - 1, t)
    e_lo = eta_array(derivs_lower, t)
    ok = np.ones(e_lo.shape, dtype=bool)
    for l in range(1, n - 1):
        ok &= (derivs_lower[l] >= 0) & (derivs_lower[l] <= box.widths[l])
    vol = box.derivative_volume
    if tl == 0.0:
        inside = ok & (e_lo >= 0) & (e_lo <= a)
        out = np.zeros(e_lo.shape)
        if np.any(inside):
            out[inside] = width * np.asarray(F(e_lo[inside], np.full(np.count_nonzero(inside), tn))) / vol
        return out
    ends = np.stack([e_lo, e_lo - tl * width])
    lo = np.clip(ends.min(0), 0.0, a)
    hi = np.clip(ends.max(0), 0.0, a)
    xg, wg = gauss_legendre(nodes)
    half = 0.5 * (hi - lo)
    pts = (0.5 * (hi + lo))[..., None] + half[..., None] * xg
    vals = np.asarray(F(pts, np.full(pts.shape, tn)))
    integral = half * (vals @ wg)
    return np.where(ok & (hi > lo), integral / (abs(tl) * vol), 0.0)


def marginalize_general(F: Callable, p_lower: PhasePoint, t: float, box: PhaseBox, nodes: int = 64):
    """Marginal of the order-``n`` lift of ``F`` at the order-``n-1`` point ``p_lower``.

    For a 3-D point the per-axis factors multiply, so ``F`` must then be a
    sequence of three per-axis densities; the result is their product.
    """
    if p_lower.dimension == 1:
        return float(marginalize_general_array(F, p_lower.derivs[:, 0], t, box, nodes))
    if len(F) != 3:
        raise ValueError("3-D marginalization needs one density per axis")
    return float(
        np.prod([marginalize_general_array(F[i], p_lower.derivs[:, i], t, box, nodes) for i in range(3)])
    )


# ---------------------------------------------------------------------------
# support geometry


def support_polygon(t: float, box: PhaseBox) -> np.ndarray:
    """Corners of the ``n = 2`` support in the ``(x, v)`` plane at time ``t``, counter-clockwise."""
    a, adot = box.a, box.adot
    return np.array([[0.0, 0.0], [a, 0.0], [a + adot * t, adot], [adot * t, adot]])


def polygon_area(corners) -> float:
    x, y = np.asarray(corners, dtype=float).T
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
