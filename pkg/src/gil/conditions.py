"""Smallness conditions on (beta, potential), composite constant, and unit scaling.

The composite constant cbar = max(c0/c1, c2/c1 - 1, 1) controls every bound.  The
primary high-temperature condition reads

    (4/pi) sqrt(12 d cbar) sqrt(beta c1) (1/c1) ||g0''||_- <= 1/2,

with ||.||_- the concave-part L1 norm from the potentials module.  Two alternative
conditions use lower-order norms of g0.  ``scale_to_unit`` reduces any (beta, V0,
g0) to the normalized setting beta = 1, c1 = 1 that the decomposition pipeline
assumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .potentials import Potential, NormReport

__all__ = [
    "ConditionReport",
    "cbar",
    "check_fcond",
    "check_alt",
    "check_conditions",
    "scale_to_unit",
]

C11_PREFACTOR = 2500.0 / (2.0 * math.pi)


def cbar(c0: float, c1: float, c2: float) -> float:
    """Composite constant max(c0/c1, c2/c1 - 1, 1)."""
    if c1 <= 0:
        raise ValueError(f"c1 must be positive, got {c1}")
    if c0 < 0 or c2 < c1:
        raise ValueError(f"need c0 >= 0 and c2 >= c1, got {(c0, c1, c2)}")
    return max(c0 / c1, c2 / c1 - 1.0, 1.0)


@dataclass(frozen=True)
class ConditionReport:
    """Left-hand sides, beta thresholds, and verdicts for the three conditions.

    Optimistic verdicts use the computed norms as-is; pessimistic ones inflate
    each norm by the reported quadrature error before comparing.
    """

    beta: float
    d: int
    cbar: float
    lhs_fcond: float
    lhs_9: float
    lhs_11: float
    beta_max_fcond: float
    beta_max_9: float
    beta_max_11: float
    satisfied: dict
    satisfied_pessimistic: dict
    norm_error: float

    def to_dict(self) -> dict:
        return asdict(self)


def _lhs_fcond(beta: float, d: int, c1: float, cb: float, l1_g0pp: float) -> float:
    return (4.0 / math.pi) * math.sqrt(12.0 * d * cb) * math.sqrt(beta * c1) / c1 * l1_g0pp


def _lhs_9(beta: float, d: int, c1: float, cb: float, l2_g0p: float) -> float:
    if not math.isfinite(l2_g0p):
        return math.inf
    return 50.0 / math.sqrt(2.0 * math.pi) * d * cb * (beta * c1) ** 0.75 / c1 * l2_g0p


def _lhs_11(beta: float, d: int, c1: float, cb: float, l1_g0: float) -> float:
    if not math.isfinite(l1_g0):
        return math.inf
    return C11_PREFACTOR * d * d * cb**3 * (beta * c1) ** 1.5 / c1 * l1_g0


def check_conditions(beta: float, d: int, p: Potential, nr: NormReport) -> ConditionReport:
    """Evaluate the primary and both alternative conditions at (beta, d)."""
    if beta <= 0 or d < 1:
        raise ValueError(f"need beta > 0 and d >= 1, got beta={beta}, d={d}")
    cb = cbar(p.c0, p.c1, p.c2)
    c1 = p.c1
    lf = _lhs_fcond(beta, d, c1, cb, nr.l1_g0pp)
    l9 = _lhs_9(beta, d, c1, cb, nr.l2_g0p)
    l11 = _lhs_11(beta, d, c1, cb, nr.l1_g0)

    # thresholds: each lhs is a pure power of beta, so invert directly
    bmax_f = (0.5 / lf) ** 2 * beta if lf > 0 else math.inf
    bmax_9 = (0.5 / l9) ** (4.0 / 3.0) * beta if 0 < l9 < math.inf else (math.inf if l9 == 0 else 0.0)
    bmax_11 = (0.25 / l11) ** (2.0 / 3.0) * beta if 0 < l11 < math.inf else (math.inf if l11 == 0 else 0.0)

    eps = nr.quadrature_error
    lf_p = _lhs_fcond(beta, d, c1, cb, nr.l1_g0pp + eps)
    l9_p = _lhs_9(beta, d, c1, cb, nr.l2_g0p + eps)
    l11_p = _lhs_11(beta, d, c1, cb, nr.l1_g0 + eps)
    return ConditionReport(
        beta=beta,
        d=d,
        cbar=cb,
        lhs_fcond=lf,
        lhs_9=l9,
        lhs_11=l11,
        beta_max_fcond=bmax_f,
        beta_max_9=bmax_9,
        beta_max_11=bmax_11,
        satisfied={"fcond": lf <= 0.5, "alt_9": l9 <= 0.5, "alt_11": l11 <= 0.25},
        satisfied_pessimistic={"fcond": lf_p <= 0.5, "alt_9": l9_p <= 0.5, "alt_11": l11_p <= 0.25},
        norm_error=eps,
    )


def check_fcond(beta: float, d: int, p: Potential, nr: NormReport) -> ConditionReport:
    """Primary condition; alias of check_conditions with all lhs fields filled."""
    return check_conditions(beta, d, p, nr)


def check_alt(beta: float, d: int, p: Potential, nr: NormReport) -> tuple[float, float]:
    """Left-hand sides of the two alternative conditions (compare to 1/2 and 1/4)."""
    rep = check_conditions(beta, d, p, nr)
    return rep.lhs_9, rep.lhs_11


def scale_to_unit(p: Potential, beta: float) -> tuple[Potential, float]:
    """Rescale (V0, g0) at inverse temperature beta to the beta = 1, c1 = 1 frame.

    Returns the scaled potential and tilt_scale = sqrt(beta c1); tilts map as
    u -> tilt_scale * u.  The scaled constants are (c0/c1, 1, c2/c1) and the
    concave-part norm picks up the factor sqrt(beta c1)/c1.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    k = math.sqrt(beta * p.c1)
    c1 = p.c1

    def _scale0(f):
        return lambda s: beta * f(np.asarray(s, dtype=float) / k)

    def _scale1(f):
        return lambda s: (beta / k) * f(np.asarray(s, dtype=float) / k)

    def _scale2(f):
        return lambda s: f(np.asarray(s, dtype=float) / k) / c1

    cn = {}
    base = p.closed_norms
    if "l1_g0pp" in base:
        cn["l1_g0pp"] = base["l1_g0pp"] * k / c1
    if "l1_g0pp_abs" in base:
        cn["l1_g0pp_abs"] = base["l1_g0pp_abs"] * k / c1
    if "l2_g0p" in base:
        cn["l2_g0p"] = base["l2_g0p"] * beta**0.75 * c1**-0.25
    if "l1_g0" in base:
        cn["l1_g0"] = base["l1_g0"] * beta**1.5 * math.sqrt(c1)

    scaled = Potential(
        family=f"scaled:{p.family}",
        params={**p.params, "beta": beta, "base_family": p.family},
        v0=_scale0(p.v0),
        dv0=_scale1(p.dv0),
        d2v0=_scale2(p.d2v0),
        g0=_scale0(p.g0),
        dg0=_scale1(p.dg0),
        d2g0=_scale2(p.d2g0),
        c0=p.c0 / c1,
        c1=1.0,
        c2=p.c2 / c1,
        g0pp_breakpoints=tuple(x * k for x in p.g0pp_breakpoints),
        g0_support=None if p.g0_support is None else (p.g0_support[0] * k, p.g0_support[1] * k),
        closed_norms=cn,
        v_total=None if p.v_total is None else _scale0(p.v_total),
        dv_total=None if p.dv_total is None else _scale1(p.dv_total),
        d2v_total=None if p.d2v_total is None else _scale2(p.d2v_total),
    )
    return scaled, k
