"""Special functions and quadrature primitives shared by the other modules.

Everything here is a pure function.  The quadrature helpers wrap adaptive
Gauss-Kronrod integration (QUADPACK via scipy) behind explicit substitutions
that remove the endpoint singularities appearing in the weight functions
(s(1-s))^nu with nu in (-1/2, 0) and the algebraic tau -> 0 behavior of the
semi-infinite integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import AccuracyError, DivergentIntegralError, DomainError

# Default tolerances: relative 1e-8 for one-dimensional quadrature, 1e-6 for
# iterated two-dimensional integrals (callers pass the looser value down).
REL_TOL_1D = 1e-8
REL_TOL_2D = 1e-6
ABS_TOL_FLOOR = 1e-300


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __post_init__(self):
        if self.abs_error_estimate < 0:
            raise DomainError("abs_error_estimate must be >= 0")
        if self.evaluations < 1:
            raise DomainError("evaluations must be >= 1")


def gamma_fn(x: float) -> float:
    """Gamma function for positive real argument."""
    if x <= 0:
        raise DomainError(f"gamma_fn requires x > 0, got {x}")
    return float(special.gamma(x))


def bessel_k0(x) -> float:
    """Modified Bessel function K0(x) for x > 0.

    Underflows gracefully to 0 for very large arguments (x >~ 740).
    Accepts scalars or arrays; arrays must be strictly positive.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("bessel_k0 requires x > 0")
    out = special.k0(arr)
    if arr.ndim == 0:
        return float(out)
    return out


def beta_weight_integral(nu: float, rel_tol: float = REL_TOL_1D) -> float:
    """Integral of (s(1-s))^nu over [0,1], finite for nu > -1.

    Computed with the substitution s = sin^2(theta/2) which turns the
    integrand into (sin theta)^(2 nu + 1) / 2^(2 nu + 1), regular at the
    endpoints for nu > -1/2 and integrable down to nu > -1.
    """
    if nu <= -1:
        raise DivergentIntegralError(
            f"(s(1-s))^nu is not integrable for nu = {nu} <= -1"
        )

    scale = 2.0 ** (-(2.0 * nu + 1.0))

    def integrand(theta):
        return scale * math.sin(theta) ** (2.0 * nu + 1.0)

    value, err = integrate.quad(integrand, 0.0, math.pi, epsrel=rel_tol, limit=200)
    return value


def gaussian_expectation(
    f: Callable[[float], float],
    rel_tol: float = REL_TOL_1D,
    breakpoints=(),
) -> QuadratureResult:
    """Expectation of f against the standard normal weight.

    The integral is split at 0 (and at any caller-declared breakpoints) so
    that power-law integrands |y|^(2 nu) with nu in (-1/2, 0) present their
    singularities at panel endpoints, where the adaptive rule extrapolates
    reliably.
    """
    norm = 1.0 / math.sqrt(2.0 * math.pi)

    def integrand(y):
        return norm * f(y) * math.exp(-0.5 * y * y)

    edges = sorted({0.0} | {float(b) for b in breakpoints if abs(b) < 1e8})
    panels = (
        [(-np.inf, edges[0])]
        + list(zip(edges[:-1], edges[1:]))
        + [(edges[-1], np.inf)]
    )
    total = 0.0
    err_total = 0.0
    neval = 0
    for a, b in panels:
        value, err, info = integrate.quad(
            integrand, a, b, epsrel=rel_tol, epsabs=ABS_TOL_FLOOR,
            limit=200, full_output=True,
        )[:3]
        total += value
        err_total += err
        neval += info["neval"]
    if err_total > max(1e-6, 10.0 * rel_tol * abs(total)) and abs(total) > 0:
        raise AccuracyError(
            f"gaussian_expectation did not converge: value={total}, err={err_total}"
        )
    return QuadratureResult(total, err_total, neval)


def integrate_unit_interval(
    f: Callable[[float], float],
    endpoint_exponent: float = 0.0,
    rel_tol: float = REL_TOL_1D,
) -> QuadratureResult:
    """Integral over [0,1] of f(s) * (s(1-s))^endpoint_exponent.

    The weight (declared by the caller, exponent > -1) is handled by the
    s = sin^2(theta/2) substitution; f itself must be bounded on (0,1).
    """
    w = endpoint_exponent
    if w <= -1:
        raise DivergentIntegralError(
            f"endpoint weight (s(1-s))^{w} is not integrable"
        )
    scale = 2.0 ** (-(2.0 * w + 1.0))

    def integrand(theta):
        s = math.sin(0.5 * theta) ** 2
        return scale * math.sin(theta) ** (2.0 * w + 1.0) * f(s)

    value, err, info = integrate.quad(
        integrand, 0.0, math.pi, epsrel=rel_tol, epsabs=ABS_TOL_FLOOR,
        limit=400, full_output=True,
    )[:3]
    return QuadratureResult(value, err, info["neval"])


def _scan_tail_scale(f, decay_power):
    """Locate the scale tau* where the integrand has fallen to 1e-3 of its
    peak, weighting by tau to discount the integrable singularity at 0."""
    grid = np.logspace(-8, 8, 81)
    weighted = np.array([abs(f(t)) * t for t in grid])
    if not np.any(weighted > 0):
        return 1.0
    i_peak = int(np.argmax(weighted))
    peak = weighted[i_peak]
    for i in range(i_peak, len(grid)):
        if weighted[i] < 1e-3 * peak:
            return float(grid[i])
    return float(grid[-1])


def integrate_semi_infinite(
    f: Callable[[float], float],
    small_tau_exponent: float = 0.0,
    decay_power: float = 1.0,
    rel_tol: float = REL_TOL_1D,
) -> QuadratureResult:
    """Integral of f over (0, infinity).

    f may behave like tau^small_tau_exponent (> -1) near 0 and must decay at
    least like exp(-c tau^decay_power) (or an integrable power) at infinity.
    The range is split at tau* (see _scan_tail_scale); the head integral uses
    a singularity-removing power substitution, the tail the decay-adapted
    change of variable u = tau^decay_power.
    """
    a = small_tau_exponent
    if a <= -1:
        raise DivergentIntegralError(
            f"tau^{a} is not integrable at 0"
        )
    b = decay_power
    if b <= 0:
        raise DomainError(f"decay_power must be positive, got {b}")

    tau_star = _scan_tail_scale(f, b)

    # Head: tau = tau* v^(1/(1+a)) maps the tau^a endpoint behavior to a
    # bounded integrand on [0,1].
    q = 1.0 / (1.0 + a)

    def head(v):
        if v <= 0.0:
            return 0.0
        tau = tau_star * v**q
        return f(tau) * tau_star * q * v ** (q - 1.0)

    v1, e1, info1 = integrate.quad(
        head, 0.0, 1.0, epsrel=rel_tol, epsabs=ABS_TOL_FLOOR,
        limit=400, full_output=True,
    )[:3]

    # Tail: u = tau^b turns exp(-c tau^b) decay into plain exponential decay.
    def tail(u):
        tau = u ** (1.0 / b)
        return f(tau) * tau ** (1.0 - b) / b

    v2, e2, info2 = integrate.quad(
        tail, tau_star**b, np.inf, epsrel=rel_tol, epsabs=ABS_TOL_FLOOR,
        limit=400, full_output=True,
    )[:3]

    value = v1 + v2
    err = e1 + e2
    neval = info1["neval"] + info2["neval"]
    if abs(value) > 0 and err > max(1e-6 * abs(value), 1e3 * rel_tol * abs(value)):
        raise AccuracyError(
            f"integrate_semi_infinite did not converge: value={value}, err={err}"
        )
    return QuadratureResult(value, err, neval)


def gaussian_shifted_abs_moment(two_nu: float, shift) -> float:
    """E|z + y|^(2 nu) for standard normal y, finite for 2 nu > -1.

    Closed form E|y|^(2 nu) * 1F1(-nu; 1/2; -z^2/2) (a Kummer function);
    reduces to gaussian_abs_moment at z = 0.  Accepts scalar or array z.
    """
    if two_nu <= -1:
        raise DivergentIntegralError(
            f"E|z + y|^{two_nu} diverges for exponent <= -1"
        )
    nu = 0.5 * two_nu
    z = np.asarray(shift, dtype=float)
    # scipy's hyp1f1 spuriously returns inf for arguments below about
    # -1e-100; the shift correction there is O(z^2), far under double
    # precision, so clamp such shifts to exactly zero.
    z = np.where(np.abs(z) < 1e-45, 0.0, z)
    out = gaussian_abs_moment(two_nu) * special.hyp1f1(-nu, 0.5, -0.5 * z * z)
    if z.ndim == 0:
        return float(out)
    return out


def gaussian_abs_moment(two_nu: float) -> float:
    """E|y|^(2 nu) for standard normal y, finite for 2 nu > -1.

    Closed form 2^nu Gamma(nu + 1/2) / sqrt(pi); used by the scale-invariant
    bound formulas.
    """
    if two_nu <= -1:
        raise DivergentIntegralError(
            f"E|y|^{two_nu} diverges for exponent <= -1"
        )
    nu = 0.5 * two_nu
    return 2.0**nu * gamma_fn(nu + 0.5) / math.sqrt(math.pi)
