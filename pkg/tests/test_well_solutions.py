import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import chebyshev

from vlasov_char.well_solutions import (
    ModeConstants,
    OutOfWellError,
    ThetaSolution,
    TruncationError,
    TruncationPolicy,
    WellParams,
    characteristic_slope,
    current_theta,
    density_stationary,
    density_theta,
    density_theta_time_avg,
    energy,
    flux_theta,
    flux_theta_log_derivative,
    half_period_flux_symmetry,
    psi_stationary,
    psi_theta,
    psi_theta_derivatives,
    psi_theta_eps,
    stationary_limit_bound,
    theta1,
    theta1_log_derivative,
    vartheta_phase,
)


def uniform_rule(f, a, n=1024):
    """Periodic rectangle rule on [0, a): exact for trigonometric polynomials of degree < n."""
    x = np.arange(n) * a / n
    return np.sum(f(x)) * a / n


# ---------------------------------------------------------------------------
# constants


def test_energy_examples():
    p = WellParams(a=1.0)
    assert energy(p.mode(1)) == pytest.approx(math.pi**2 / 2, rel=1e-15)
    assert energy(p.mode(2)) == pytest.approx(2 * math.pi**2, rel=1e-15)
    assert energy(WellParams(a=2.0).mode(1)) == pytest.approx(energy(p.mode(1)) / 4, rel=1e-15)


@pytest.mark.parametrize("mu", [1, 2, 5])
@pytest.mark.parametrize("a", [0.5, 1.3])
def test_mode_constant_relations(mu, a):
    p = WellParams(m=2.0, hbar=0.7, a=a)
    md = p.mode(mu)
    assert md.lam * a == pytest.approx(math.pi * mu)
    assert md.E == pytest.approx(math.pi**2 * md.eps)
    assert md.T == pytest.approx(math.pi * p.hbar / (4 * md.E))


@pytest.mark.parametrize("bad", [dict(m=0.0), dict(hbar=-1.0), dict(a=float("nan"))])
def test_well_params_validation(bad):
    with pytest.raises(ValueError):
        WellParams(**bad)


@pytest.mark.parametrize("mu", [0, -1, 1.5])
def test_mode_number_validation(mu):
    with pytest.raises(ValueError):
        ModeConstants.from_params(WellParams(), mu)


# ---------------------------------------------------------------------------
# stationary mode


def test_psi_stationary_examples(params):
    md = params.mode(1)
    a = params.a
    assert psi_stationary(0.0, 0.3, md, params) == pytest.approx(0.0, abs=1e-15)
    assert abs(psi_stationary(a, 0.3, md, params)) < 1e-15
    assert psi_stationary(a / 2, 0.0, md, params) == pytest.approx(math.sqrt(2 / a))
    eta = np.linspace(0, a, 17)
    np.testing.assert_allclose(np.abs(psi_stationary(eta, 0.0, md, params)), np.abs(psi_stationary(eta, 2.7, md, params)))


def test_stationary_out_of_well(params):
    with pytest.raises(OutOfWellError):
        psi_stationary(-0.1, 0.0, params.mode(1), params)
    with pytest.raises(OutOfWellError):
        density_stationary(params.a * 1.01, params.mode(1), params)


@pytest.mark.parametrize("mu", [1, 2, 3, 7])
def test_density_stationary_nodes_and_norm(params, mu):
    md = params.mode(mu)
    a = params.a
    nodes = a / mu * np.arange(mu + 1)
    np.testing.assert_allclose(density_stationary(nodes, md, params), 0.0, atol=1e-28)
    x, w = np.polynomial.legendre.leggauss(64)
    total = 0.5 * a * np.dot(w, density_stationary(0.5 * a * (x + 1), md, params))
    assert total == pytest.approx(1.0, abs=1e-10)
    if mu == 1:
        assert density_stationary(a / 2, md, params) == pytest.approx(2 / a)


# ---------------------------------------------------------------------------
# theta series


@pytest.mark.parametrize("z", [0.0, 1.0, -2.0, 3.0])
@pytest.mark.parametrize("tau_c", [0.3 + 0.01j, -0.5 + 0.2j, 1j])
def test_theta1_vanishes_at_integers(z, tau_c):
    assert abs(theta1(z, tau_c)) < 1e-12 * math.sqrt(1 / tau_c.imag)


@pytest.mark.parametrize("z", [0.1, 0.3 + 0.05j, 0.77])
@pytest.mark.parametrize("tau_c", [0.2 + 0.3j, -0.5 + 0.05j, 0.9 + 1.5j])
def test_theta1_matches_standard_theta(z, tau_c):
    # independent evaluation through mpmath's nome-based theta function
    q = mpmath.exp(1j * mpmath.pi * tau_c)
    ref = -complex(mpmath.jtheta(1, mpmath.pi * z, q))
    assert theta1(z, tau_c) == pytest.approx(ref, rel=1e-11, abs=1e-13)


def test_theta1_truncation_self_consistency():
    z, tau_c = 0.3, -0.5 + 0.01j
    lo = theta1(z, tau_c, TruncationPolicy(mode="fixed", K=50))
    hi = theta1(z, tau_c, TruncationPolicy(mode="fixed", K=100))
    assert abs(lo - hi) <= 1e-12 * abs(hi)
    assert theta1(z, tau_c) == pytest.approx(hi, rel=1e-12)


def test_theta1_errors():
    with pytest.raises(ValueError):
        theta1(0.2, 0.5 - 0.1j)
    with pytest.raises(ValueError):
        theta1(0.2, 0.5)
    with pytest.raises(TruncationError):
        theta1(0.3, 0.001j, TruncationPolicy(mode="fixed", K=5))


@pytest.mark.parametrize("kw", [dict(mode="other"), dict(K=0), dict(term_tol=0.0), dict(term_tol=1.0)])
def test_truncation_policy_validation(kw):
    with pytest.raises(ValueError):
        TruncationPolicy(**kw)


def test_adaptive_truncation_size(comb):
    # harmonics are symmetric and the dropped weights sit below term_tol
    m = comb.harmonics
    np.testing.assert_array_equal(m, -m[::-1])
    edge = m.max() + 2
    assert math.exp(-math.pi * comb.beta * (edge**2 - 1) / 4) < comb.trunc.term_tol
    assert 30 <= m.max() // 2 <= 120


# ---------------------------------------------------------------------------
# theta wavefunction and density


def test_theta_solution_validation(params):
    with pytest.raises(ValueError):
        ThetaSolution.create(beta=0.0)
    with pytest.raises(ValueError):
        ThetaSolution.create(flux_cosine="other")
    with pytest.raises(ValueError):
        ThetaSolution(params, WellParams(a=1.0).mode(1), 0.1)


def test_norm_constant(comb):
    k = np.arange(-400, 400)
    expected = comb.params.a * np.sum(np.exp(-math.pi * comb.beta * (2 * k + 1) ** 2 / 2))
    assert comb.normN == pytest.approx(expected, rel=1e-14)


def test_psi_theta_boundaries(comb):
    a = comb.params.a
    for tau in (0.0, 0.3 * comb.mode.T, 1.7):
        assert abs(psi_theta(0.0, tau, comb)) < 1e-12
        assert abs(psi_theta(a, tau, comb)) < 1e-10
    with pytest.raises(OutOfWellError):
        psi_theta(1.1 * a, 0.0, comb)


def test_psi_theta_two_parameterizations(comb, rng):
    a = comb.params.a
    e = rng.uniform(0, a, 200)
    t = rng.uniform(-2 * comb.mode.T, 2 * comb.mode.T, 200)
    np.testing.assert_allclose(psi_theta_eps(e, t, comb), psi_theta(e, t, comb), rtol=0, atol=1e-12 * np.abs(psi_theta(e, t, comb)).max())


@pytest.mark.parametrize("beta", [0.01, 0.1, 1.0])
@pytest.mark.parametrize("mu", [1, 2])
def test_psi_theta_normalized(beta, mu):
    sol = ThetaSolution.create(mu=mu, beta=beta)
    for tau in np.linspace(0, sol.mode.T, 5):
        total = uniform_rule(lambda x: np.abs(psi_theta(x, tau, sol)) ** 2, sol.params.a)
        assert total == pytest.approx(1.0, abs=1e-10)


def test_modulus_is_periodic(comb, rng):
    a, T = comb.params.a, comb.mode.T
    e = rng.uniform(0, a, 100)
    t = rng.uniform(0, T, 100)
    p0, p1 = psi_theta(e, t, comb), psi_theta(e, t + T, comb)
    np.testing.assert_allclose(np.abs(p1), np.abs(p0), atol=1e-10)
    # a single global phase relates the two
    phase = p1[np.abs(p0) > 0.5] / p0[np.abs(p0) > 0.5]
    np.testing.assert_allclose(phase, phase[0], atol=1e-9)


def test_density_equals_modulus_squared(comb):
    a, T = comb.params.a, comb.mode.T
    E, Tt = np.meshgrid(np.linspace(0, a, 31), np.linspace(0, T, 31), indexing="ij")
    np.testing.assert_allclose(density_theta(E, Tt, comb), np.abs(psi_theta(E, Tt, comb)) ** 2, atol=1e-10)


def test_density_nonnegative(comb, rng):
    a, T = comb.params.a, comb.mode.T
    assert density_theta(rng.uniform(0, a, 2000), rng.uniform(0, T, 2000), comb).min() > -1e-12


@settings(max_examples=30, deadline=None)
@given(theta=st.floats(-10, 10), j=st.integers(0, 8))
def test_chebyshev_identity(theta, j):
    # T_j(cos theta) = cos(j theta): the pair series uses the right-hand side
    coef = np.zeros(j + 1)
    coef[j] = 1.0
    assert chebyshev.chebval(math.cos(theta), coef) == pytest.approx(math.cos(j * theta), abs=1e-14 * (1 + j * j))


def test_vartheta_phase_examples(comb):
    a, T = comb.params.a, comb.mode.T
    assert vartheta_phase(0.0, 0.0, 0, 0, comb) == pytest.approx(math.pi)
    # s + k + 1 = 0: no tau dependence
    assert vartheta_phase(0.13, 0.0, 2, -3, comb) == pytest.approx(vartheta_phase(0.13, 5.7, 2, -3, comb))
    # constant along eta / a = slope * tau / T + c
    s, k = 1, 3
    slope = characteristic_slope(s, k, comb.mode.mu)
    tau = np.linspace(0, T, 9)
    eta = a * (0.1 + slope * tau / T)
    np.testing.assert_allclose(vartheta_phase(eta, tau, s, k, comb), vartheta_phase(0.1 * a, 0.0, s, k, comb), atol=1e-12)


# ---------------------------------------------------------------------------
# flux


def off_node(sol, rng, count=300, floor=0.2):
    a, T = sol.params.a, sol.mode.T
    e = rng.uniform(0.02 * a, 0.98 * a, 20 * count)
    t = rng.uniform(0, T, 20 * count)
    keep = density_theta(e, t, sol) > floor / a
    return e[keep][:count], t[keep][:count]


def test_flux_matches_probability_current(comb, rng):
    e, t = off_node(comb, rng)
    psi, d1, _, _ = psi_theta_derivatives(e, t, comb)
    hbar, m = comb.params.hbar, comb.params.m
    oracle = hbar / m * np.imag(np.conj(psi) * d1) / np.abs(psi) ** 2
    np.testing.assert_allclose(flux_theta(e, t, comb), oracle, rtol=1e-8, atol=1e-8)


def test_flux_current_consistency(comb, rng):
    e, t = off_node(comb, rng, 50)
    np.testing.assert_allclose(current_theta(e, t, comb), flux_theta(e, t, comb) * density_theta(e, t, comb), rtol=1e-12)


def test_scaled_cosine_reading_gives_no_flux(rng):
    # the alternative reading of the flux series cancels term by term
    sol = ThetaSolution.create(beta=0.01, flux_cosine="scaled")
    e, t = off_node(sol, rng, 50)
    np.testing.assert_array_equal(flux_theta(e, t, sol), 0.0)


def test_flux_undefined_at_nodes(comb):
    assert math.isnan(flux_theta(0.0, 0.1 * comb.mode.T, comb))


def test_flux_periodic(comb, rng):
    e, t = off_node(comb, rng, 200)
    np.testing.assert_allclose(flux_theta(e, t + comb.mode.T, comb), flux_theta(e, t, comb), atol=1e-10)


@pytest.mark.parametrize(
    "z, tau_c",
    [
        (0.3, 0.01j),
        (0.0204, -0.98 + 0.01j),
        (0.71, 2.37 + 0.003j),
        (0.13 + 0.05j, -0.4 + 0.5j),
        (0.5, 1.3 + 2.0j),
        (0.999, -5.02 + 0.001j),
    ],
)
def test_theta1_log_derivative_matches_standard(z, tau_c):
    mpmath.mp.dps = 40
    q = mpmath.exp(1j * mpmath.pi * tau_c)
    w = mpmath.pi * z
    ref = complex(mpmath.pi * mpmath.jtheta(1, w, q, 1) / mpmath.jtheta(1, w, q))
    mpmath.mp.dps = 15
    got = theta1_log_derivative(z, tau_c)
    # absolute floor: at z = 1/2 the log-derivative vanishes by symmetry
    assert abs(got - ref) <= 1e-12 * max(abs(ref), 1.0)


def test_theta1_log_derivative_matches_series():
    # the direct series is accurate where theta1 is not small
    z = np.linspace(0.1, 0.9, 9)
    h = 1e-6
    tc = 0.37 + 0.4j
    fd = (theta1(z + h, tc) - theta1(z - h, tc)) / (2 * h) / theta1(z, tc)
    np.testing.assert_allclose(theta1_log_derivative(z, tc), fd, rtol=1e-8, atol=1e-8)


def test_theta1_log_derivative_rejects_real_tau():
    with pytest.raises(ValueError):
        theta1_log_derivative(0.3, 0.5 + 0j)


def _low_density_points(sol, n_eta=50, n_tau=50):
    a, T = sol.params.a, sol.mode.T
    E, Tt = np.meshgrid(np.linspace(0, a, n_eta), np.linspace(0, T, n_tau), indexing="ij")
    F = density_theta(E, Tt, sol)
    low = (F > sol.density_floor) & (F < 0.2 / a)
    return E[low], Tt[low], F[low]


def flux_oracle(e, t, sol):
    """Flux from mpmath's theta log-derivative at 40 digits."""
    mpmath.mp.dps = 40
    a, mu, T = sol.params.a, sol.mode.mu, sol.mode.T
    q = mpmath.exp(1j * mpmath.pi * (-mpmath.mpf(t) / T + 1j * mpmath.mpf(sol.beta)))
    w = mpmath.pi * mu * mpmath.mpf(e) / a
    L = mpmath.jtheta(1, w, q, 1) / mpmath.jtheta(1, w, q)
    out = float(mpmath.im(L) * mpmath.pi * mu / a) * sol.params.hbar / sol.params.m
    mpmath.mp.dps = 15
    return out


def test_flux_accurate_at_low_density(comb, rng):
    # where the density is orders below its peak, the ratio of the two pair
    # series would keep only a few digits; the flux must still be accurate
    e, t, F = _low_density_points(comb)
    order = np.argsort(F)
    pick = np.concatenate([order[:15], rng.choice(order, 15, replace=False)])
    for i in pick:
        assert abs(flux_theta(e[i], t[i], comb) - flux_oracle(e[i], t[i], comb)) < 1e-10


@pytest.mark.parametrize("beta, mu", [(0.01, 3), (0.05, 1), (0.003, 1)])
def test_flux_accurate_over_grid(beta, mu, rng):
    sol = ThetaSolution.create(mu=mu, beta=beta)
    T = sol.mode.T
    e = rng.uniform(0, sol.params.a, 30)
    t = rng.uniform(0, T, 30)
    u = flux_theta(e, t, sol)
    scale = np.nanmax(np.abs(u))
    for ei, ti, ui in zip(e, t, u):
        if not np.isnan(ui):
            assert abs(ui - flux_oracle(ei, ti, sol)) < 1e-12 * scale


def test_log_derivative_flux_agrees_with_pair_series(comb, rng):
    e, t = off_node(comb, rng, 200)
    np.testing.assert_allclose(flux_theta_log_derivative(e, t, comb), flux_theta(e, t, comb), rtol=1e-10, atol=1e-10)


def test_flux_periodic_near_nodes(comb):
    e, t, _ = _low_density_points(comb)
    np.testing.assert_allclose(flux_theta(e, t + comb.mode.T, comb), flux_theta(e, t, comb), atol=1e-10)


def test_scaled_reading_is_zero_at_low_density():
    sol = ThetaSolution.create(beta=0.01, flux_cosine="scaled")
    e, t, _ = _low_density_points(sol)
    assert e.size > 0
    np.testing.assert_array_equal(flux_theta(e, t, sol), 0.0)


def test_half_period_relation():
    # which sign-reversal holds is measured, not assumed: time reversal does,
    # the pure half-period shifts do not
    dev = half_period_flux_symmetry(ThetaSolution.create(beta=0.05))
    assert dev["time_reversal"] < 1e-8
    assert dev["half_shift"] > 0.1
    assert dev["half_shift_mirror"] > 0.1


# ---------------------------------------------------------------------------
# time average and the stationary limit


def test_time_average_matches_quadrature(comb):
    T = comb.mode.T
    eta = np.linspace(0, comb.params.a, 25)
    E, Tt = np.meshgrid(eta, np.arange(1024) * T / 1024, indexing="ij")
    np.testing.assert_allclose(density_theta(E, Tt, comb).mean(1), density_theta_time_avg(eta, comb), atol=1e-8)
    assert density_theta_time_avg(0.0, comb) == 0.0


def test_time_average_limit(params):
    sol = ThetaSolution.create(beta=10.0)
    eta = np.linspace(0, params.a, 51)
    np.testing.assert_allclose(density_theta_time_avg(eta, sol), density_stationary(eta, params.mode(1), params), atol=1e-12)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("mu", [1, 3])
def test_stationary_limit_bound_holds(params, beta, mu):
    sol = ThetaSolution.create(mu=mu, beta=beta)
    md = params.mode(mu)
    bound = stationary_limit_bound(beta, params, md)
    E, Tt = np.meshgrid(np.linspace(0, params.a, 301), np.linspace(0, md.T, 25), indexing="ij")
    dF = np.abs(density_theta(E, Tt, sol) - density_stationary(E, md, params)).max()
    dJ = np.abs(current_theta(E, Tt, sol)).max()
    assert dF <= bound["density"] * (1 + 1e-9)
    assert dJ <= bound["current"] * (1 + 1e-9)
    # and the bound is not vacuous
    assert dF >= 0.5 * bound["density"]


def test_beta_freezing_is_monotone(params):
    md = params.mode(1)
    E, Tt = np.meshgrid(np.linspace(0, params.a, 201), np.linspace(0, md.T, 21), indexing="ij")
    dist, flux = [], []
    for beta in (0.5, 1, 2, 5, 10):
        sol = ThetaSolution.create(beta=beta)
        dist.append(np.abs(density_theta(E, Tt, sol) - density_stationary(E, md, params)).max())
        flux.append(np.nanmax(np.abs(flux_theta(E[5:-5], Tt[5:-5], sol))))
    assert dist[-1] < 1e-12 and flux[-1] < 1e-12
    if not (np.all(np.diff(dist) <= 0) and np.all(np.diff(flux) <= 0)):
        warnings.warn(f"freezing not monotone on this grid: {dist}, {flux}")
