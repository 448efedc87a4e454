"""Exterior-domain toolkit for the 2D Lagrangian mean curvature equation.

Solves arctan(lam1) + arctan(lam2) of the Hessian = theta + f(x) outside a
disc, extracts the far-field expansion (A, b, c, d), measures remainder
decay rates, and numerically exercises the Lewy rotation and the
fractional-Laplacian identities behind the asymptotic theory.
"""

from .asymptotics import DecayFit, Expansion, d_from_flux, estimate_decay, fit_A, fit_bcd, harmonic_fit
from .fields import PolarGrid, ScalarField, circle_modes, flux_integral, gradient, hessian, rescale
from .fraclap import FracParams, PowerTail, commutator_defect, cross_term, frac_laplacian, product_rule_defect, riesz_potential
from .oracles import OracleSpec, oracle_field
from .phase import PhaseParams, Sym2, eigenvalues, lewy_hessian, lewy_hessian_inverse, phase, phase_gradient
from .scenario import ScenarioConfig, lewy_roundtrip_check, parse_config, run_scenario
from .solver import ExteriorProblem, NewtonReport, newton_solve, radial_solve, residual

__version__ = "0.1.0"
