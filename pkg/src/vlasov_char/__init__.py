"""Characteristic-coordinate solutions of the Vlasov chain in an infinite well.

Modules
-------
characteristics
    Characteristic coordinate ``eta_n``, time weights and Taylor propagation.
well_solutions
    Stationary and theta-function wavefunctions, densities and fluxes.
chain_lift
    Lift of a characteristic density to order-``n`` phase space and its
    marginals.
bridge
    Wavefunction-to-kinetic correspondence and PDE residual checks.
figures, verify, cli
    Tabulated figure data, the verification suite and the command line.
"""
from .characteristics import PhasePoint, eta, hyperplane_normal, propagate, tau
from .well_solutions import (
    ModeConstants,
    ThetaSolution,
    TruncationPolicy,
    WellParams,
    density_theta,
    flux_theta,
    psi_theta,
    theta1,
    theta1_log_derivative,
)
from .chain_lift import PhaseBox, marginal_density, marginal_flux
from .bridge import CoefficientSet, ResidualReport

__all__ = [
    "PhasePoint",
    "eta",
    "hyperplane_normal",
    "propagate",
    "tau",
    "ModeConstants",
    "ThetaSolution",
    "TruncationPolicy",
    "WellParams",
    "density_theta",
    "flux_theta",
    "psi_theta",
    "theta1",
    "theta1_log_derivative",
    "PhaseBox",
    "marginal_density",
    "marginal_flux",
    "CoefficientSet",
    "ResidualReport",
]

__version__ = "0.1.0"
