import math
import warnings

import numpy as np
import pytest
from scipy.integrate import IntegrationWarning, quad

from gil.conditions import check_conditions, scale_to_unit
from gil.lattice import Torus
from gil.mcmc import ChainConfig
from gil.potentials import example_a, example_b, example_c, gaussian_potential, norms


@pytest.fixture(scope="session")
def pot_gauss():
    return gaussian_potential()


@pytest.fixture(scope="session")
def pot_a():
    return example_a(0.5)


@pytest.fixture(scope="session")
def pot_b():
    return example_b(0.5)


@pytest.fixture(scope="session")
def pot_c():
    return example_c(0.05, 2.0, 1.0)


@pytest.fixture(scope="session")
def beta_half_b(pot_b):
    """Half the primary-condition threshold for example_b(0.5) at d = 1."""
    return check_conditions(1.0, 1, pot_b, norms(pot_b)).beta_max_fcond / 2.0


@pytest.fixture(scope="session")
def scaled_b(pot_b, beta_half_b):
    ps, k = scale_to_unit(pot_b, beta_half_b)
    return ps, k


@pytest.fixture
def quick_chain():
    return ChainConfig(n_steps=6000, burn_in=1000, thinning=1, n_chains=2, seed=1234)


def conditioning_log_expectation(u: float, m: int, g_scalar, breakpoints) -> float:
    """Independent d = 1 reference for E_mu[exp(-sum_b g(u + grad_b))].

    Under the pinned Dirichlet weight the bond gradients are iid standard
    normals conditioned to sum to zero; the constraint is resolved by a Fourier
    integral, so only 1d quadratures enter.  Used as an oracle for the tensor
    backends.
    """

    def ft(t):
        re, _ = quad(
            lambda e: math.exp(-g_scalar(u + e)) * math.exp(-e * e / 2) * math.cos(t * e) / math.sqrt(2 * math.pi),
            -12, 12, points=breakpoints, limit=400, epsabs=1e-15, epsrel=1e-14,
        )
        im, _ = quad(
            lambda e: math.exp(-g_scalar(u + e)) * math.exp(-e * e / 2) * math.sin(t * e) / math.sqrt(2 * math.pi),
            -12, 12, points=breakpoints, limit=400, epsabs=1e-15, epsrel=1e-14,
        )
        return complex(re, im)

    with warnings.catch_warnings():
        # the tolerances here sit below what QUADPACK will certify; the values
        # are cross-validated against the tensor backends regardless
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(lambda t: (ft(t) ** m).real, -50, 50, limit=1000, epsabs=1e-15, epsrel=1e-14)
    p0 = 1 / math.sqrt(2 * math.pi * m)
    return math.log(val / (2 * math.pi * p0))


@pytest.fixture(scope="session")
def conditioning_reference():
    return conditioning_log_expectation


def random_pinned(t: Torus, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    vals = np.zeros(t.volume)
    vals[1:] = scale * rng.standard_normal(t.n_dof)
    return vals
