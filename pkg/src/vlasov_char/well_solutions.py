"""Exact solutions of the free equation ``i dPsi/dtau = -(hbar/2m) d2Psi/deta2`` in ``0 < eta < a``.

Two families are provided:

* stationary sine modes with a pure time phase (zero probability flux);
* the theta-function "Dirac comb" family, a Gaussian-weighted sum of all
  odd harmonics whose density refocuses with period ``T_mu``.

All evaluators broadcast over array arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DENSITY_FLOOR = 1e-12
_WELL_SLACK = 1e-12
_CHUNK_ELEMENTS = 2_000_000


class OutOfWellError(ValueError):
    """Raised when a coordinate lies outside ``[0, a]``, where the potential is infinite."""


class TruncationError(ArithmeticError):
    """Raised when a theta series cannot be truncated to the requested tolerance."""


@dataclass(frozen=True)
class WellParams:
    m: float = 1.0
    hbar: float = 1.0
    a: float = 0.5

    def __post_init__(self):
        for name in ("m", "hbar", "a"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")

    def mode(self, mu: int) -> "ModeConstants":
        return ModeConstants.from_params(self, mu)


@dataclass(frozen=True)
class ModeConstants:
    """Per-mode quantities: wavenumber, energy, reduced energy and revival period."""

    mu: int
    lam: float
    E: float
    eps: float
    T: float

    @classmethod
    def from_params(cls, params: WellParams, mu: int) -> "ModeConstants":
        if int(mu) != mu or mu < 1:
            raise ValueError(f"mode number must be a positive integer, got {mu!r}")
        mu = int(mu)
        m, hbar, a = params.m, params.hbar, params.a
        eps = hbar**2 * mu**2 / (2 * m * a**2)
        return cls(
            mu=mu,
            lam=math.pi * mu / a,
            E=math.pi**2 * eps,
            eps=eps,
            T=m * a**2 / (2 * math.pi * hbar * mu**2),
        )


@dataclass(frozen=True)
class TruncationPolicy:
    """How theta-type series over odd harmonics are cut.

    ``mode="adaptive"`` keeps every term whose magnitude is at least
    ``term_tol`` times the largest one.  ``mode="fixed"`` keeps
    ``|2k + 1| <= 2K + 1`` and raises if the edge terms are still above
    ``term_tol``.
    """

    mode: str = "adaptive"
    K: int = 64
    term_tol: float = 1e-16
    K_max: int = 200_000

    def __post_init__(self):
        if self.mode not in ("adaptive", "fixed"):
            raise ValueError(f"unknown truncation mode {self.mode!r}")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not 0 < self.term_tol < 1:
            raise ValueError("term_tol must lie in (0, 1)")


def _odd_harmonics(q: float, c: float, trunc: TruncationPolicy) -> np.ndarray:
    """Odd integers ``m`` kept in a sum whose log term magnitude is ``-q m^2 - c m``."""
    log_tol = math.log(trunc.term_tol)
    center = -c / (2 * q)
    peak = c * c / (4 * q)

    def log_mag(m):
        return -q * m * m - c * m

    if trunc.mode == "fixed":
        edge = 2 * trunc.K + 1
        if max(log_mag(edge), log_mag(-edge)) - peak > log_tol:
            raise TruncationError(
                f"edge term with K={trunc.K} is above term_tol={trunc.term_tol:g}"
            )
        return np.arange(-edge, edge + 1, 2, dtype=float)

    radius = math.sqrt(-log_tol / q)
    lo = math.floor(center - radius)
    hi = math.ceil(center + radius)
    if (hi - lo) / 2 > 2 * trunc.K_max + 1:
        raise TruncationError(
            f"series needs more than K_max={trunc.K_max} terms (imaginary part too small)"
        )
    lo -= 1 - abs(lo) % 2
    hi += 1 - abs(hi) % 2
    m = np.arange(lo, hi + 1, 2, dtype=float)
    if c == 0.0:
        # keep the set symmetric so odd-pair cancellations are exact
        mmax = np.max(np.abs(m[log_mag(m) - peak >= log_tol]))
        m = np.arange(-mmax, mmax + 1, 2, dtype=float)
    return m


def _theta_sum(z, tau_c, m):
    z, tau_c = np.broadcast_arrays(np.asarray(z), np.asarray(tau_c))
    phase = (1j * math.pi / 4) * tau_c[..., None] * m**2 + (1j * math.pi / 2) * (2 * z[..., None] + 1) * m
    return np.sum(np.exp(phase), axis=-1)


def theta1(z, tau_c, trunc: TruncationPolicy | None = None):
    """Odd-harmonic theta series ``sum_k exp(i pi tau_c (2k+1)^2/4 + i pi (2z+1)(2k+1)/2)``.

    This is the convention used throughout the package; it equals
    ``-theta_1(pi z | tau_c)`` in the standard normalization.  ``z`` may be
    an array; ``tau_c`` must be a scalar with positive imaginary part.
    """
    trunc = trunc or TruncationPolicy()
    tau_c = complex(tau_c)
    if not tau_c.imag > 0:
        raise ValueError(f"Im(tau_c) must be positive, got {tau_c!r}")
    z = np.asarray(z, dtype=complex)
    zi = z.imag
    q = math.pi * tau_c.imag / 4
    out = np.empty(z.shape, dtype=complex)
    # truncation depends on Im(z); group by distinct values (normally just one)
    for c in np.unique(zi):
        sel = zi == c
        m = _odd_harmonics(q, math.pi * float(c), trunc)
        out[sel] = _theta_sum(z[sel], tau_c, m)
    return out if out.ndim else complex(out)


def theta1_log_derivative(z, tau_c, max_steps: int = 200, terms: int = 12):
    """``d/dz log theta1(z, tau_c)`` via modular reduction of ``tau_c``.

    The direct series is a sum of many unit-size terms when ``Im(tau_c)`` is
    small, and where ``theta1`` is small (between the comb teeth, near the
    walls) their cancellation destroys the relative accuracy.  The
    log-derivative is invariant under ``tau -> tau + 1`` and transforms as

        D(w | tau) = 2 i tau' w / pi + tau' D(w tau' | tau'),   tau' = -1/tau

    (``w = pi z``, ``D`` the standard log-derivative), so ``tau_c`` can be
    moved into the fundamental domain, where the nome is below ``0.07``
    and a dozen terms suffice without cancellation.  Multiplicative
    constants of the transformation drop out of the log-derivative.

    ``z`` and ``tau_c`` broadcast; ``Im(tau_c)`` must be positive.
    """
    z, tau_c = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(tau_c, dtype=complex))
    shape = z.shape
    if np.any(tau_c.imag <= 0):
        raise ValueError("Im(tau_c) must be positive")
    w = math.pi * z.ravel()
    tc = tau_c.ravel().copy()
    add = np.zeros_like(w)
    mul = np.ones_like(w)
    for _ in range(max_steps):
        tc -= np.round(tc.real)
        s = np.abs(tc) < 1
        if not s.any():
            break
        tp = -1 / tc[s]
        add[s] += mul[s] * (2j / math.pi) * tp * w[s]
        mul[s] *= tp
        w[s] *= tp
        tc[s] = tp
    else:
        raise TruncationError("modular reduction of tau_c did not converge")
    # quasi-periods: D(w + pi) = D(w),  D(w + pi tau) = D(w) - 2i
    shift = np.round(w.imag / (math.pi * tc.imag))
    w -= math.pi * shift * tc
    add -= 2j * mul * shift
    w -= math.pi * np.round(w.real / math.pi)
    n = np.arange(terms)
    k = 2 * n + 1
    base = 1j * math.pi * tc[:, None] * (n + 0.5) ** 2
    ep = base + 1j * k * w[:, None]
    em = base - 1j * k * w[:, None]
    # common rescaling keeps exp() in range for large Im(tau) after reduction
    top = np.maximum(ep.real.max(-1), em.real.max(-1))[:, None]
    sign = (-1.0) ** n
    ep = sign * np.exp(ep - top)
    em = sign * np.exp(em - top)
    with np.errstate(divide="ignore", invalid="ignore"):
        D = add + mul * (1j * k * (ep + em)).sum(-1) / (ep - em).sum(-1)
    out = (math.pi * D).reshape(shape)
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------------------
# stationary modes


def _check_in_well(eta, a):
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < -_WELL_SLACK * a) or np.any(eta > a * (1 + _WELL_SLACK)):
        raise OutOfWellError(f"eta outside the well [0, {a}]")
    return eta


def energy(mode: ModeConstants) -> float:
    return mode.E


def psi_stationary(eta, tau, mode: ModeConstants, params: WellParams):
    """Stationary mode ``sqrt(2/a) sin(sqrt(2 m E) eta / hbar) exp(-i E tau / hbar)``."""
    eta = _check_in_well(eta, params.a)
    k = math.sqrt(2 * params.m * mode.E) / params.hbar
    out = math.sqrt(2 / params.a) * np.sin(k * eta) * np.exp(-1j * mode.E * np.asarray(tau) / params.hbar)
    return out if np.ndim(out) else complex(out)


def density_stationary(eta, mode: ModeConstants, params: WellParams):
    """Density ``(2/a) sin^2(lambda_mu eta)`` of a stationary mode; its mean flux is zero."""
    eta = _check_in_well(eta, params.a)
    out = (2 / params.a) * np.sin(mode.lam * eta) ** 2
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# theta-function family


@dataclass(frozen=True)
class ThetaSolution:
    """Dirac-comb solution with inverse temperature ``beta``.

    ``flux_cosine`` selects how the cosine in the flux series is read:
    ``"multiple"`` is ``cos((k - s) * theta_sk)`` (the correct form);
    ``"scaled"`` is ``(k - s) * cos(theta_sk)``, kept only as a negative
    control for the verification harness.
    """

    params: WellParams
    mode: ModeConstants
    beta: float
    trunc: TruncationPolicy = field(default_factory=TruncationPolicy)
    flux_cosine: str = "multiple"
    density_floor: float = DENSITY_FLOOR
    normN: float = field(init=False)
    harmonics: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        if self.flux_cosine not in ("multiple", "scaled"):
            raise ValueError(f"unknown flux_cosine {self.flux_cosine!r}")
        if abs(self.params.mode(self.mode.mu).lam - self.mode.lam) > 1e-12 * self.mode.lam:
            raise ValueError("mode constants do not belong to params")
        m = _odd_harmonics(math.pi * self.beta / 4, 0.0, self.trunc)
        m.setflags(write=False)
        object.__setattr__(self, "harmonics", m)
        n = self.params.a * float(np.sum(np.exp(-math.pi * self.beta * m**2 / 2)))
        object.__setattr__(self, "normN", n)
        object.__setattr__(self, "_pairs", self._build_pairs())

    @classmethod
    def create(cls, mu: int = 1, beta: float = 0.01, params: WellParams | None = None, **kw):
        params = params or WellParams()
        return cls(params=params, mode=params.mode(mu), beta=beta, **kw)

    def _build_pairs(self):
        m = self.harmonics
        i, j = np.triu_indices(m.size)
        mk, ms = m[j], m[i]
        logw = -math.pi * self.beta * (mk**2 + ms**2) / 4
        keep = logw - (-math.pi * self.beta / 2) >= math.log(self.trunc.term_tol)
        mk, ms, logw = mk[keep], ms[keep], logw[keep]
        return {
            "diff": (mk - ms) / 2,  # k - s >= 0
            "p": (mk + ms) / 2,  # s + k + 1
            "w": np.exp(logw) / self.normN,
            "offdiag": mk != ms,
        }

    @property
    def tau_complex_slope(self) -> float:
        """``d tau_c / d tau`` for the theta argument ``tau_c = -tau / T + i beta``."""
        return -1.0 / self.mode.T


def _theta_args(eta, tau, sol: ThetaSolution):
    a = sol.params.a
    eta = _check_in_well(eta, a)
    tau = np.asarray(tau, dtype=float)
    eta, tau = np.broadcast_arrays(eta, tau)
    return eta, tau


def psi_theta_derivatives(eta, tau, sol: ThetaSolution):
    """Return ``(Psi, dPsi/deta, d2Psi/deta2, dPsi/dtau)`` from the single theta series."""
    eta, tau = _theta_args(eta, tau, sol)
    m = sol.harmonics
    mu, a, T = sol.mode.mu, sol.params.a, sol.mode.T
    z = mu * eta / a
    phase = (1j * math.pi / 4) * (-tau[..., None] / T + 1j * sol.beta) * m**2
    phase = phase + (1j * math.pi / 2) * (2 * z[..., None] + 1) * m
    terms = np.exp(phase) / math.sqrt(sol.normN)
    k = 1j * math.pi * mu * m / a
    psi = terms.sum(-1)
    d1 = (terms * k).sum(-1)
    d2 = (terms * k**2).sum(-1)
    dt = (terms * (-1j * math.pi * m**2 / (4 * T))).sum(-1)
    return psi, d1, d2, dt


def psi_theta(eta, tau, sol: ThetaSolution):
    """Normalized wavefunction ``theta1(mu eta / a, -mu^2 2 pi hbar tau / (m a^2) + i beta) / sqrt(N)``."""
    eta, tau = _theta_args(eta, tau, sol)
    mu, a = sol.mode.mu, sol.params.a
    slope = -(mu**2) * 2 * math.pi * sol.params.hbar / (sol.params.m * a**2)
    out = _theta_sum(mu * eta / a, slope * tau + 1j * sol.beta, sol.harmonics) / math.sqrt(sol.normN)
    return out if out.ndim else complex(out)


def psi_theta_eps(eta, tau, sol: ThetaSolution):
    """Same wavefunction written through the reduced energy ``eps_mu``."""
    eta, tau = _theta_args(eta, tau, sol)
    hbar, m = sol.params.hbar, sol.params.m
    eps = sol.mode.eps
    z = math.sqrt(2 * m * eps) / hbar * eta
    tau_c = -4 * math.pi * eps / hbar * tau + 1j * sol.beta
    out = _theta_sum(z, tau_c, sol.harmonics) / math.sqrt(sol.normN)
    return out if out.ndim else complex(out)


def vartheta_phase(eta, tau, s: int, k: int, sol: ThetaSolution):
    """Phase ``pi (2 mu eta / a + 1) - pi tau (s + k + 1) / T_mu`` of the (s, k) cross term."""
    mu, a, T = sol.mode.mu, sol.params.a, sol.mode.T
    out = math.pi * (2 * mu * np.asarray(eta, dtype=float) / a + 1) - math.pi * np.asarray(tau, dtype=float) * (s + k + 1) / T
    return out if np.ndim(out) else float(out)


def characteristic_slope(s: int, k: int, mu: int) -> float:
    """``tan`` of the slope of the lines ``eta / a`` vs ``tau / T_mu`` on which the (s, k) term is constant."""
    return (s + k + 1) / (2 * mu)


def _pair_sums(eta, tau, sol: ThetaSolution, want_flux: bool):
    eta, tau = _theta_args(eta, tau, sol)
    pairs = sol._pairs
    mu, a, T = sol.mode.mu, sol.params.a, sol.mode.T
    # p is an integer, so tau/T may be reduced mod 2 without changing any cosine
    base = (math.pi * (2 * mu * eta / a + 1)).ravel()
    tfrac = np.mod(tau / T, 2.0).ravel()
    dens = np.empty(base.size)
    flux = np.empty(base.size) if want_flux else None
    diff, p, w, off = pairs["diff"], pairs["p"], pairs["w"], pairs["offdiag"]
    mult = np.where(off, 2.0, 1.0)
    chunk = max(1, _CHUNK_ELEMENTS // max(diff.size, 1))
    for lo in range(0, base.size, chunk):
        hi = lo + chunk
        theta = base[lo:hi, None] - math.pi * tfrac[lo:hi, None] * p
        c = np.cos(diff * theta)
        dens[lo:hi] = c @ (mult * w)
        if want_flux:
            if sol.flux_cosine == "multiple":
                flux[lo:hi] = c @ (mult * w * p)
            else:
                # (k - s) cos(theta) is odd under s <-> k and theta is symmetric,
                # so every (s, k) + (k, s) pair cancels and diagonal terms vanish
                flux[lo:hi] = 0.0
    shape = eta.shape
    return dens.reshape(shape), (flux.reshape(shape) if want_flux else None)


def density_theta(eta, tau, sol: ThetaSolution):
    """Density from the Gaussian-weighted double sum of Chebyshev cross terms.

    ``T_j(cos x)`` is evaluated as ``cos(j x)``.
    """
    dens, _ = _pair_sums(eta, tau, sol, want_flux=False)
    return dens if dens.ndim else float(dens)


def flux_theta_log_derivative(eta, tau, sol: ThetaSolution):
    """Mean flux ``(hbar/m) Im(dPsi/deta / Psi)`` from the modular-reduced theta log-derivative.

    Accurate to near machine precision wherever ``Psi != 0``, including
    points where the density is many orders below its peak.
    """
    eta, tau = _theta_args(eta, tau, sol)
    mu, a, T = sol.mode.mu, sol.params.a, sol.mode.T
    L = theta1_log_derivative(mu * eta / a, -tau / T + 1j * sol.beta)
    out = sol.params.hbar / sol.params.m * (mu / a) * np.imag(L)
    return out if np.ndim(out) else float(out)


# below this density (in units of 1/a) the pair-series flux is a ratio of two
# sums that cancel to a few digits; the log-derivative path takes over there
PAIR_FLUX_MIN_DENSITY = 0.2


def flux_theta(eta, tau, sol: ThetaSolution):
    """Mean flux of the comb solution; NaN where the density is below ``sol.density_floor``.

    The flux is the ratio of the two pair series.  Where the density is
    below ``PAIR_FLUX_MIN_DENSITY / a`` both sums cancel to a handful of
    digits and their ratio loses accuracy roughly as ``1e-12 / (F a)``, so
    there the same quantity is taken from :func:`flux_theta_log_derivative`.
    With the ``"scaled"`` cosine reading the numerator series vanishes
    identically and the flux is zero wherever it is defined.
    """
    dens, num = _pair_sums(eta, tau, sol, want_flux=True)
    a, mu, T = sol.params.a, sol.mode.mu, sol.mode.T
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(dens > sol.density_floor, a * num / (2 * mu * T * dens), np.nan)
    low = (dens > sol.density_floor) & (dens < PAIR_FLUX_MIN_DENSITY / a)
    if sol.flux_cosine == "multiple" and np.any(low):
        e, t = _theta_args(eta, tau, sol)
        out = np.array(out, dtype=float)
        out[low] = flux_theta_log_derivative(e[low], t[low], sol)
    return out if np.ndim(out) else float(out)


def current_theta(eta, tau, sol: ThetaSolution):
    """Probability current ``F * flux`` from the double sum, defined everywhere."""
    _, num = _pair_sums(eta, tau, sol, want_flux=True)
    a, mu, T = sol.params.a, sol.mode.mu, sol.mode.T
    out = a * num / (2 * mu * T)
    return out if out.ndim else float(out)


def density_theta_time_avg(eta, sol: ThetaSolution):
    """Period average ``(2/N) sum_k exp(-pi beta (2k+1)^2 / 2) sin^2((2k+1) pi mu eta / a)``."""
    eta = _check_in_well(eta, sol.params.a)
    m = sol.harmonics
    w = np.exp(-math.pi * sol.beta * m**2 / 2)
    s = np.sin(m * math.pi * sol.mode.mu * eta[..., None] / sol.params.a) ** 2
    out = 2 / sol.normN * (s @ w)
    return out if out.ndim else float(out)


def stationary_limit_bound(beta: float, params: WellParams, mode: ModeConstants, m_max: int = 10_001) -> dict:
    """Analytic bounds on how far the theta solution is from the stationary mode.

    With ``rho = sum_{m>=3 odd} exp(-pi beta (m^2 - 1) / 4)``,
    ``rho1`` the same sum weighted by ``m`` and
    ``nu = sum_{m>=3 odd} exp(-pi beta (m^2 - 1) / 2)``:

    * ``|F - F_stationary| <= (2/a) (2 rho + rho^2 + nu)`` everywhere;
    * ``|F u| <= (hbar/m) (2 lambda / a) (rho1 + rho + rho rho1)``.

    Both decay like ``exp(-2 pi beta)``.  They bound the exact series, so
    they also cover whatever the truncation policy drops.
    """
    m = np.arange(3, m_max + 1, 2, dtype=float)
    rho = float(np.sum(np.exp(-math.pi * beta * (m * m - 1) / 4)))
    rho1 = float(np.sum(m * np.exp(-math.pi * beta * (m * m - 1) / 4)))
    nu = float(np.sum(np.exp(-math.pi * beta * (m * m - 1) / 2)))
    a = params.a
    return {
        "rho": rho,
        "rho1": rho1,
        "nu": nu,
        "density": 2 / a * (2 * rho + rho * rho + nu),
        "current": params.hbar / params.m * 2 * mode.lam / a * (rho1 + rho + rho * rho1),
    }


def half_period_flux_symmetry(sol: ThetaSolution, n_eta: int = 41, n_tau: int = 16) -> dict:
    """Measure which sign-reversal relation the flux obeys in the second half-period.

    Returns the max deviation for three candidates:

    ``time_reversal``    u(eta, T - tau) = -u(eta, tau)
    ``half_shift``       u(eta, tau + T/2) = -u(eta, tau)
    ``half_shift_mirror`` u(eta, tau + T/2) = -u(a - eta, tau)
    """
    a, T = sol.params.a, sol.mode.T
    eta = np.linspace(0.05 * a, 0.95 * a, n_eta)
    tau = np.linspace(0.02 * T, 0.48 * T, n_tau)
    E, Tt = np.meshgrid(eta, tau, indexing="ij")
    u = flux_theta(E, Tt, sol)
    # the flux is a ratio; near-nodes it is too ill-conditioned to compare
    ok = density_theta(E, Tt, sol) > 1e-3 / a
    ok &= density_theta(E, Tt + T / 2, sol) > 1e-3 / a
    u = np.where(ok, u, np.nan)
    scale = np.nanmax(np.abs(u))
    out = {
        "time_reversal": np.nanmax(np.abs(flux_theta(E, T - Tt, sol) + u)),
        "half_shift": np.nanmax(np.abs(flux_theta(E, Tt + T / 2, sol) + u)),
        "half_shift_mirror": np.nanmax(np.abs(flux_theta(E, Tt + T / 2, sol) + flux_theta(a - E, Tt, sol))),
    }
    return {k: float(v / scale) for k, v in out.items()}
