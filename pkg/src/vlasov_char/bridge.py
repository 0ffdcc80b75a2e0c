"""Wavefunction <-> kinetic correspondence and PDE residual checks.

A positive density ``F = |Psi|^2`` with flux ``u = -2 alpha d(arg Psi)/deta``
solves the first-order continuity equation whenever ``Psi`` solves

    (i / beta) dPsi/dtau = (alpha / beta) d2Psi/deta2 + U Psi.

The canonical coefficients ``alpha = -hbar/2m``, ``beta = 1/hbar`` turn this
into the Schroedinger equation.  Every residual checker evaluates its PDE
with second-order central differences at steps ``h`` and ``h/2``; the
tolerance is the Richardson estimate of the ``O(h^2)`` truncation error,
so a genuine solution passes while a wrong field leaves an ``O(1)``
residual that does not shrink with ``h``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .well_solutions import (
    DENSITY_FLOOR,
    ModeConstants,
    ThetaSolution,
    WellParams,
    psi_stationary,
    psi_theta,
    psi_theta_derivatives,
)

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class CoefficientSet:
    alpha: float
    betac: float
    gamma: float = 0.0

    def __post_init__(self):
        if self.betac == 0:
            raise ValueError("betac must be non-zero")

    @classmethod
    def canonical(cls, params: WellParams, q: float = 0.0) -> "CoefficientSet":
        return cls(alpha=-params.hbar / (2 * params.m), betac=1 / params.hbar, gamma=-q / params.m)


@dataclass(frozen=True)
class ScalarField1D:
    """Time-dependent field ``value(eta, tau)`` on ``[0, a]`` with optional analytic derivatives.

    Missing derivatives fall back to central differences with step ``h``.
    """

    value: Callable
    a: float
    d_eta: Optional[Callable] = None
    d_eta2: Optional[Callable] = None
    d_tau: Optional[Callable] = None
    h: float = 1e-4

    def __call__(self, eta, tau=0.0):
        return self.value(eta, tau)

    def deta(self, eta, tau=0.0):
        if self.d_eta is not None:
            return self.d_eta(eta, tau)
        h = self.h * self.a
        eta = np.asarray(eta, dtype=float)
        return (self.value(eta + h, tau) - self.value(eta - h, tau)) / (2 * h)

    def deta2(self, eta, tau=0.0):
        if self.d_eta2 is not None:
            return self.d_eta2(eta, tau)
        h = self.h * self.a
        eta = np.asarray(eta, dtype=float)
        return (self.value(eta + h, tau) - 2 * self.value(eta, tau) + self.value(eta - h, tau)) / h**2

    def without_derivatives(self, h: float | None = None) -> "ScalarField1D":
        return ScalarField1D(self.value, self.a, h=self.h if h is None else h)


@dataclass
class ResidualReport:
    name: str
    grid: str
    max_abs: float
    tolerance: float
    passed: bool = field(init=False)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.max_abs = float(self.max_abs)
        self.tolerance = float(self.tolerance)
        self.passed = bool(self.max_abs <= self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


# ---------------------------------------------------------------------------
# field factories


def stationary_field(mode: ModeConstants, params: WellParams) -> ScalarField1D:
    k = mode.lam

    def value(eta, tau):
        return psi_stationary(eta, tau, mode, params)

    def d1(eta, tau):
        eta = np.asarray(eta, dtype=float)
        return math.sqrt(2 / params.a) * k * np.cos(k * eta) * np.exp(-1j * mode.E * np.asarray(tau) / params.hbar)

    def d2(eta, tau):
        return -(k**2) * value(eta, tau)

    def dt(eta, tau):
        return (-1j * mode.E / params.hbar) * value(eta, tau)

    return ScalarField1D(value, params.a, d1, d2, dt)


def theta_field(sol: ThetaSolution) -> ScalarField1D:
    """Comb wavefunction with derivatives from the term-wise differentiated series."""
    return ScalarField1D(
        lambda e, t: psi_theta(e, t, sol),
        sol.params.a,
        lambda e, t: psi_theta_derivatives(e, t, sol)[1],
        lambda e, t: psi_theta_derivatives(e, t, sol)[2],
        lambda e, t: psi_theta_derivatives(e, t, sol)[3],
    )


# ---------------------------------------------------------------------------
# flux and quantum potential


def flux_from_psi(psi: ScalarField1D, coeffs: CoefficientSet, eta, tau=0.0, floor: float = DENSITY_FLOOR):
    """Flux ``-2 alpha Im(Psi* dPsi) / |Psi|^2``; NaN where ``|Psi|^2`` is below ``floor``."""
    p = np.asarray(psi(eta, tau))
    dp = np.asarray(psi.deta(eta, tau))
    rho = np.abs(p) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(rho > floor, -2 * coeffs.alpha * np.imag(np.conj(p) * dp) / rho, np.nan)
    return out if out.ndim else float(out)


def quantum_potential(psi: ScalarField1D, coeffs: CoefficientSet, eta, tau=0.0, floor: float = DENSITY_FLOOR):
    """``alpha |Psi|'' / (betac |Psi|)``; NaN at nodes.

    With analytic derivatives ``|Psi|''`` is assembled from ``Psi, Psi', Psi''``;
    otherwise ``|Psi|`` itself is differenced.
    """
    eta = np.asarray(eta, dtype=float)
    p = np.asarray(psi(eta, tau))
    r = np.abs(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        if psi.d_eta is not None and psi.d_eta2 is not None:
            d1 = np.asarray(psi.d_eta(eta, tau))
            d2 = np.asarray(psi.d_eta2(eta, tau))
            r1 = np.real(np.conj(p) * d1) / r
            r2 = (np.abs(d1) ** 2 + np.real(np.conj(p) * d2)) / r - r1**2 / r
        else:
            h = psi.h * psi.a
            r2 = (np.abs(psi(eta + h, tau)) - 2 * r + np.abs(psi(eta - h, tau))) / h**2
        out = np.where(r**2 > floor, coeffs.alpha * r2 / (coeffs.betac * r), np.nan)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# residual machinery


def _report(name: str, grid: str, run: Callable, details: dict | None = None) -> ResidualReport:
    """Evaluate ``run(scale)`` at scales 1 and 1/2 and build a report.

    ``run`` returns ``(residual, noise)``: the residual array and an estimate
    of its floating-point noise at that step.  The tolerance is twice the
    Richardson truncation estimate ``4/3 max|r_h - r_{h/2}|`` plus noise.
    """
    r1, noise1 = run(1.0)
    r2, noise2 = run(0.5)
    r1, r2 = np.broadcast_arrays(np.asarray(r1), np.asarray(r2))
    ok = np.isfinite(r1) & np.isfinite(r2)
    r1, r2 = r1[ok], r2[ok]
    m1 = float(np.max(np.abs(r1))) if r1.size else 0.0
    m2 = float(np.max(np.abs(r2))) if r2.size else 0.0
    trunc = 4.0 / 3.0 * float(np.max(np.abs(r1 - r2))) if r1.size else 0.0
    tol = 2.0 * trunc + 4.0 * float(noise1) + float(noise2)
    info = {"points": int(np.count_nonzero(ok)), "max_abs_half_step": m2}
    if m2 > 0 and m1 > 0:
        info["observed_order"] = math.log2(m1 / m2)
    info.update(details or {})
    return ResidualReport(name, grid, m1, tol, details=info)


def _grid(etas, taus, paired=False):
    if paired:
        E, T = np.broadcast_arrays(np.asarray(etas, dtype=float), np.asarray(taus, dtype=float))
        return E.ravel(), T.ravel()
    E, T = np.meshgrid(np.asarray(etas, dtype=float), np.asarray(taus, dtype=float), indexing="ij")
    return E.ravel(), T.ravel()


def _describe(etas, taus, paired, h_eta, h_tau):
    if paired:
        shape = f"{np.broadcast(np.asarray(etas), np.asarray(taus)).size} (eta, tau) points"
    else:
        shape = f"{np.size(etas)}x{np.size(taus)} (eta, tau)"
    return f"{shape}, h_eta={h_eta:g}, h_tau={h_tau:g}"


def _noise(values, h, order):
    return 64 * _EPS * float(np.nanmax(np.abs(values))) / h**order


def schrodinger_residual(
    psi: ScalarField1D,
    coeffs: CoefficientSet,
    etas,
    taus,
    h_eta: float,
    h_tau: float,
    name: str = "schrodinger",
    paired: bool = False,
) -> ResidualReport:
    """``(i/beta) dPsi/dtau - (alpha/beta) d2Psi/deta2`` (``U = 0`` inside the well), differenced."""
    E, T = _grid(etas, taus, paired)
    a, b = coeffs.alpha, coeffs.betac

    def run(s):
        he, ht = h_eta * s, h_tau * s
        p0 = psi(E, T)
        pe = psi(E + he, T), psi(E - he, T)
        pt = psi(E, T + ht), psi(E, T - ht)
        dt = (pt[0] - pt[1]) / (2 * ht)
        d2 = (pe[0] - 2 * p0 + pe[1]) / he**2
        res = (1j / b) * dt - (a / b) * d2
        noise = _noise(p0, he, 2) * abs(a / b) + _noise(p0, ht, 1) / abs(b)
        return np.abs(res), noise

    grid = _describe(etas, taus, paired, h_eta, h_tau)
    return _report(name, grid, run)


def vlasov1_residual(
    F: Callable,
    u: Callable,
    etas,
    taus,
    h_eta: float,
    h_tau: float,
    name: str = "vlasov1",
    paired: bool = False,
) -> ResidualReport:
    """``dF/dtau + d(F u)/deta`` by central differences; points with undefined flux are skipped."""
    E, T = _grid(etas, taus, paired)

    def current(e, t):
        return np.asarray(F(e, t)) * np.asarray(u(e, t))

    def run(s):
        he, ht = h_eta * s, h_tau * s
        dF = (np.asarray(F(E, T + ht)) - np.asarray(F(E, T - ht))) / (2 * ht)
        jp, jm = current(E + he, T), current(E - he, T)
        dj = (jp - jm) / (2 * he)
        noise = _noise(F(E, T), ht, 1) + _noise(np.concatenate([jp, jm]), he, 1)
        return dF + dj, noise

    grid = _describe(etas, taus, paired, h_eta, h_tau)
    return _report(name, grid, run)


def vlasov_chain_residual(
    f: Callable,
    meanflux: Callable,
    points,
    times,
    steps,
    h_t: float,
    n: int,
    name: str | None = None,
) -> ResidualReport:
    """Residual of the order-``n`` chain equation in one dimension.

    ``df/dt + sum_{k<n-1} r^(k+1) df/dr^(k) + d(f <r^(n)>)/dr^(n-1)``.
    ``f(derivs, t)`` and ``meanflux(derivs, t)`` take stacks of shape
    ``(n, P)`` and times of shape ``(P,)``; ``steps`` holds one difference
    step per coordinate.
    """
    if n not in (2, 3):
        raise ValueError("chain residuals are implemented for n = 2 and 3")
    X = np.asarray(points, dtype=float)
    t = np.asarray(times, dtype=float)
    if X.shape[0] != n:
        raise ValueError(f"points must have {n} rows")
    steps = np.asarray(steps, dtype=float)

    def shifted(k, h):
        Xp, Xm = X.copy(), X.copy()
        Xp[k] += h
        Xm[k] -= h
        return Xp, Xm

    def run(s):
        ht = h_t * s
        f0 = np.asarray(f(X, t))
        res = (np.asarray(f(X, t + ht)) - np.asarray(f(X, t - ht))) / (2 * ht)
        noise = _noise(f0, ht, 1)
        for k in range(n - 1):
            h = steps[k] * s
            Xp, Xm = shifted(k, h)
            res = res + X[k + 1] * (np.asarray(f(Xp, t)) - np.asarray(f(Xm, t))) / (2 * h)
            noise += _noise(f0 * X[k + 1], h, 1)
        h = steps[n - 1] * s
        Xp, Xm = shifted(n - 1, h)
        jp = np.asarray(f(Xp, t)) * np.asarray(meanflux(Xp, t))
        jm = np.asarray(f(Xm, t)) * np.asarray(meanflux(Xm, t))
        res = res + (jp - jm) / (2 * h)
        noise += _noise(np.concatenate([jp, jm]), h, 1)
        return res, noise

    return _report(name or f"vlasov_chain_n{n}", f"{X.shape[1]} phase points, n={n}", run)


def _unwrapped_phase(values, axis=0):
    return np.unwrap(np.angle(values), axis=axis)


def hamilton_jacobi_residual(
    psi: ScalarField1D,
    coeffs: CoefficientSet,
    etas,
    taus,
    h_eta: float,
    h_tau: float,
    U: Callable | None = None,
    name: str = "hamilton_jacobi",
    paired: bool = False,
) -> ResidualReport:
    """``-(1/beta) dphi/dtau + |u|^2 / (4 alpha beta) - (U + Q)`` with all derivatives differenced.

    The phase is ``arg Psi`` unwrapped across each difference stencil;
    ``u = -2 alpha dphi/deta`` and ``Q = alpha |Psi|'' / (beta |Psi|)``.
    """
    E, T = _grid(etas, taus, paired)
    a, b = coeffs.alpha, coeffs.betac
    pot = (lambda e, t: np.zeros(np.shape(e))) if U is None else U

    def run(s):
        he, ht = h_eta * s, h_tau * s
        se = np.stack([psi(E - he, T), psi(E, T), psi(E + he, T)])
        st = np.stack([psi(E, T - ht), psi(E, T + ht)])
        ph_e = _unwrapped_phase(se)
        ph_t = _unwrapped_phase(st)
        dphi_t = (ph_t[1] - ph_t[0]) / (2 * ht)
        dphi_e = (ph_e[2] - ph_e[0]) / (2 * he)
        r = np.abs(se)
        q = a * (r[2] - 2 * r[1] + r[0]) / (he**2 * b * r[1])
        u = -2 * a * dphi_e
        res = -dphi_t / b + u**2 / (4 * a * b) - (pot(E, T) + q)
        rmin = float(np.min(r[1]))
        noise = (
            _noise(np.ones(1), ht, 1) / abs(b)
            + abs(a / b) * _noise(r, he, 2) / rmin
            + abs(u).max() * abs(a / b) * _noise(np.ones(1), he, 1)
        )
        return res, noise

    grid = _describe(etas, taus, paired, h_eta, h_tau)
    return _report(name, grid, run)


def equation_of_motion_residual(
    psi: ScalarField1D,
    coeffs: CoefficientSet,
    etas,
    taus,
    h_eta: float,
    h_tau: float,
    name: str = "equation_of_motion",
    paired: bool = False,
) -> ResidualReport:
    """``du/dtau + u du/deta - 2 alpha beta dQ/deta`` (no vector potential, ``U = 0``).

    ``u`` and ``Q`` come from ``psi`` pointwise; only the outer derivatives
    are differenced, so ``psi`` should carry analytic ``eta`` derivatives.
    """
    E, T = _grid(etas, taus, paired)
    a, b = coeffs.alpha, coeffs.betac

    def u(e, t):
        return flux_from_psi(psi, coeffs, e, t)

    def Q(e, t):
        return quantum_potential(psi, coeffs, e, t)

    def run(s):
        he, ht = h_eta * s, h_tau * s
        u0 = u(E, T)
        du_t = (u(E, T + ht) - u(E, T - ht)) / (2 * ht)
        du_e = (u(E + he, T) - u(E - he, T)) / (2 * he)
        qp, qm = Q(E + he, T), Q(E - he, T)
        dq = (qp - qm) / (2 * he)
        res = du_t + u0 * du_e - 2 * a * b * dq
        noise = 1e3 * (_noise(u0, ht, 1) + _noise(u0 * u0, he, 1) + abs(2 * a * b) * _noise(np.concatenate([qp, qm]), he, 1))
        return res, noise

    grid = _describe(etas, taus, paired, h_eta, h_tau)
    return _report(name, grid, run)
