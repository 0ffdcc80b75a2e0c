import json

import numpy as np
import pytest

from vlasov_char.bridge import ResidualReport
from vlasov_char.cli import EXIT_FAIL, EXIT_OK, main
from vlasov_char.verify import VerifyConfig, control, off_node_points, order2_moments_quadrature
from vlasov_char.chain_lift import PhaseBox, marginal_density, marginal_flux
from vlasov_char.well_solutions import WellParams, density_theta


@pytest.mark.parametrize("err, tol, passed", [(0.5, 1.0, False), (2.0, 1.0, True), (0.0, 0.0, False), (1.0, 1.0, False)])
def test_control_inverts_the_check(err, tol, passed):
    rep = control(ResidualReport("x", "g", err, tol))
    assert rep.passed is passed
    assert rep.passed is not ResidualReport("x", "g", err, tol).passed
    assert rep.name.endswith("x")


def test_off_node_points_respect_floor(comb, rng):
    e, t = off_node_points(comb, 50, rng)
    assert len(e) == len(t) == 50
    assert np.all(density_theta(e, t, comb) > 0.2 / comb.params.a)


def test_quadrature_oracle_agrees_with_closed_form():
    box = PhaseBox((0.5, 1.0))
    md = WellParams().mode(3)
    x = np.array([0.1, 0.4, 0.7, 1.2])
    t = np.array([0.2, 0.3, 0.9, 1.0])
    dens, flux = order2_moments_quadrature(x, t, md, box)
    np.testing.assert_allclose(dens, marginal_density(x, t, md, box), rtol=1e-10)
    np.testing.assert_allclose(flux, marginal_flux(x, t, md, box), rtol=1e-10)


def test_cli_verify_default_passes(capsys):
    code = main(["verify"])
    out = capsys.readouterr()
    reports = json.loads(out.out)
    assert code == EXIT_OK, out.err
    assert all(r["pass"] for r in reports)
    names = {r["name"] for r in reports}
    for prefix in ("schrodinger", "vlasov1", "vlasov_chain_n2", "vlasov_chain_n3", "hamilton_jacobi"):
        assert any(n.startswith(prefix) for n in names)
    # every residual family carries a negative control
    assert sum("perturbed" in n or "zero_flux" in n or "detuned" in n for n in names) >= 5


def test_cli_verify_broken_flux_fails(capsys):
    code = main(["verify", "--flux-cosine", "scaled"])
    out = capsys.readouterr()
    assert code == EXIT_FAIL
    failed = {r["name"] for r in json.loads(out.out) if not r["pass"]}
    assert "vlasov1:theta" in failed
    assert "FAILED: vlasov1:theta" in out.err


def test_verify_config_solution_override():
    cfg = VerifyConfig()
    assert cfg.solution().beta == cfg.beta
    assert cfg.solution(beta=10.0).beta == 10.0
