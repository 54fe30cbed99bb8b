"""Torus geometry, pinned fields, discrete gradients, and energy evaluations.

Sites of the d-dimensional discrete torus of side m are indexed row-major over
(x_1, ..., x_d); the origin has index 0 and its field value is pinned to zero.
The energy of a configuration under tilt u is

    H(u, phi) = sum_x sum_i V(grad_i phi(x) + u_i),

with V = V0 + g0 from the potentials module.  The inverse temperature is never
folded into H; it enters only through Gibbs weights exp(-beta H).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .potentials import Potential

__all__ = [
    "Torus",
    "Field",
    "grad",
    "grad_all",
    "grad_norm_sq",
    "hamiltonian",
    "grad_h",
    "hess_h_apply",
    "hess_h_quadform",
    "separate",
    "anharmonic_g",
    "induced_h1_energy",
    "induced_h1_grad",
]


@dataclass(frozen=True)
class Torus:
    """Periodic lattice (Z/mZ)^d with forward-neighbor index tables."""

    d: int
    m: int

    def __post_init__(self):
        if self.d < 1 or self.m < 2:
            raise ValueError(f"need d >= 1 and m >= 2, got d={self.d}, m={self.m}")

    @property
    def volume(self) -> int:
        return self.m**self.d

    @property
    def n_dof(self) -> int:
        """Free coordinates once the origin is pinned."""
        return self.volume - 1

    @cached_property
    def forward(self) -> np.ndarray:
        """forward[i, x] = flat index of x + e_i, shape (d, volume)."""
        idx = np.arange(self.volume).reshape((self.m,) * self.d)
        return np.stack([np.roll(idx, -1, axis=i).ravel() for i in range(self.d)])

    @cached_property
    def backward(self) -> np.ndarray:
        """backward[i, x] = flat index of x - e_i."""
        idx = np.arange(self.volume).reshape((self.m,) * self.d)
        return np.stack([np.roll(idx, 1, axis=i).ravel() for i in range(self.d)])

    def site_index(self, coords) -> int:
        coords = tuple(int(c) % self.m for c in coords)
        return int(np.ravel_multi_index(coords, (self.m,) * self.d))


@dataclass
class Field:
    """Real field on the torus pinned to zero at the origin."""

    torus: Torus
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.torus.volume,):
            raise ValueError(f"expected {self.torus.volume} site values, got shape {self.values.shape}")
        if self.values[0] != 0.0:
            raise ValueError("field must vanish at the origin")

    @classmethod
    def zeros(cls, torus: Torus) -> "Field":
        return cls(torus, np.zeros(torus.volume))

    @classmethod
    def from_dof(cls, torus: Torus, dof: np.ndarray) -> "Field":
        values = np.empty(torus.volume)
        values[0] = 0.0
        values[1:] = dof
        return cls(torus, values)

    def to_dof(self) -> np.ndarray:
        return self.values[1:].copy()

    def to_json(self) -> str:
        return json.dumps({"d": self.torus.d, "m": self.torus.m, "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Field":
        obj = json.loads(text)
        return cls(Torus(d=int(obj["d"]), m=int(obj["m"])), np.asarray(obj["values"], dtype=float))


def grad_all(t: Torus, values: np.ndarray) -> np.ndarray:
    """All forward differences, shape (d, volume): grad[i, x] = phi(x+e_i) - phi(x)."""
    return values[t.forward] - values[None, :]


def grad(t: Torus, phi: Field, x: int, i: int) -> float:
    """Single periodic difference grad_i phi(x)."""
    return float(phi.values[t.forward[i, x]] - phi.values[x])


def hamiltonian(t: Torus, u: np.ndarray, phi: Field | np.ndarray, p: Potential) -> float:
    """Total energy H(u, phi) = sum over sites and axes of V(grad + u_i)."""
    values = phi.values if isinstance(phi, Field) else np.asarray(phi, dtype=float)
    u = np.asarray(u, dtype=float)
    g = grad_all(t, values) + u[:, None]
    return float(np.sum(p.v(g)))


def grad_h(t: Torus, u: np.ndarray, phi: Field | np.ndarray, p: Potential) -> np.ndarray:
    """dH/dphi(x) for the non-origin sites, as a dof vector of length volume - 1.

    dH/dphi(x) = sum_i [V'(grad_i phi(x - e_i) + u_i) - V'(grad_i phi(x) + u_i)].
    """
    values = phi.values if isinstance(phi, Field) else np.asarray(phi, dtype=float)
    u = np.asarray(u, dtype=float)
    g = grad_all(t, values) + u[:, None]
    vp = p.dv(g)
    out = np.zeros(t.volume)
    for i in range(t.d):
        out += vp[i, t.backward[i]] - vp[i]
    return out[1:]


def hess_h_apply(t: Torus, u: np.ndarray, phi: Field | np.ndarray, p: Potential, direction: np.ndarray) -> np.ndarray:
    """Hessian-vector product (D^2 H) dir on dof vectors (origin implicit zero)."""
    values = phi.values if isinstance(phi, Field) else np.asarray(phi, dtype=float)
    u = np.asarray(u, dtype=float)
    dvals = np.zeros(t.volume)
    dvals[1:] = direction
    g = grad_all(t, values) + u[:, None]
    w = p.d2v(g) * grad_all(t, dvals)
    out = np.zeros(t.volume)
    for i in range(t.d):
        out += w[i, t.backward[i]] - w[i]
    return out[1:]


def hess_h_quadform(t: Torus, u: np.ndarray, phi: Field | np.ndarray, p: Potential, direction: np.ndarray) -> float:
    """Quadratic form dir . (D^2 H) dir = sum_{x,i} V''(grad+u)(grad_i dir)^2."""
    values = phi.values if isinstance(phi, Field) else np.asarray(phi, dtype=float)
    u = np.asarray(u, dtype=float)
    dvals = np.zeros(t.volume)
    dvals[1:] = direction
    g = grad_all(t, values) + u[:, None]
    return float(np.sum(p.d2v(g) * grad_all(t, dvals) ** 2))


def grad_norm_sq(t: Torus, values: np.ndarray) -> float:
    """Dirichlet energy ||grad phi||^2 summed over sites and axes."""
    return float(np.sum(grad_all(t, values) ** 2))


def anharmonic_g(t: Torus, u: np.ndarray, values: np.ndarray, p: Potential) -> float:
    """G(u, phi) = sum_{x,i} g(u_i + grad_i phi) with g(s) = V(s) - s^2/2 (c1 = 1)."""
    u = np.asarray(u, dtype=float)
    g = grad_all(t, np.asarray(values, dtype=float)) + u[:, None]
    return float(np.sum(p.v(g) - g * g / 2.0))


def induced_h1_energy(t: Torus, p: Potential, u: np.ndarray, psi_values: np.ndarray, theta_dof: np.ndarray, lam: float) -> float:
    """H1(theta) = G(u, psi + theta) + ||grad theta||^2 / (2 lam), theta pinned."""
    theta = np.zeros(t.volume)
    theta[1:] = theta_dof
    return anharmonic_g(t, u, psi_values + theta, p) + grad_norm_sq(t, theta) / (2.0 * lam)


def induced_h1_grad(t: Torus, p: Potential, u: np.ndarray, psi_values: np.ndarray, theta_dof: np.ndarray, lam: float) -> np.ndarray:
    """dH1/dtheta(x) over non-origin sites, as a dof vector."""
    u = np.asarray(u, dtype=float)
    theta = np.zeros(t.volume)
    theta[1:] = theta_dof
    arg = grad_all(t, psi_values + theta) + u[:, None]
    gt = grad_all(t, theta)
    w = (p.dv(arg) - arg) + gt / lam
    out = np.zeros(t.volume)
    for i in range(t.d):
        out += w[i, t.backward[i]] - w[i]
    return out[1:]


def separate(t: Torus, u: np.ndarray, phi: Field | np.ndarray, p: Potential) -> tuple[float, float]:
    """Split H into the exact Gaussian part and the anharmonic remainder.

    Valid only for potentials already scaled to c1 = 1: returns
    (|T| |u|^2 / 2 + ||grad phi||^2 / 2,  sum g(u_i + grad_i phi)) with
    g(s) = V(s) - s^2/2, and the two parts sum to hamiltonian(...).
    """
    if abs(p.c1 - 1.0) > 1e-12:
        raise ValueError(f"separate requires a unit-scaled potential (c1 = 1), got c1 = {p.c1}")
    values = phi.values if isinstance(phi, Field) else np.asarray(phi, dtype=float)
    u = np.asarray(u, dtype=float)
    g = grad_all(t, values) + u[:, None]
    gauss = 0.5 * t.volume * float(u @ u) + 0.5 * grad_norm_sq(t, values)
    g_part = float(np.sum(p.v(g) - g * g / 2.0))
    return gauss, g_part
