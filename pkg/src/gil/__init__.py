"""Numerical laboratory for lattice gradient interface models.

Potentials V = V0 + g0 on torus-indexed height fields, free energies and their
tilt Hessians at desk scale, the one-step Gaussian scale decomposition with its
convexity certificates, and quadrature/Monte Carlo cross checks for every
estimator.
"""

from .conditions import ConditionReport, cbar, check_alt, check_conditions, check_fcond, scale_to_unit
from .gff import PoincareConstant, SpectralCovariance, poincare_constant, sample_gff, spectrum
from .lattice import Field, Torus, grad, grad_all, hamiltonian, separate
from .mcmc import ChainConfig, Estimate, Observable, Target, fluctuation_hessian, run_chain, run_chains
from .oracle import QuadratureSpec, free_energy, hessian_fd, log_partition, renorm_apply
from .potentials import (
    NormReport,
    Potential,
    constants,
    custom_potential,
    eval_potential,
    example_a,
    example_b,
    example_c,
    gaussian_potential,
    norms,
    validate_growth,
)
from .renorm import DecompositionPlan, certify_h1_convexity, estimate_r1g, verify_theorem

__version__ = "0.1.0"
