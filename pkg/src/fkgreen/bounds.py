"""Deterministic Jensen bounds on the momentum-space transition kernel.

Lower bound: the path expectation is moved inside the exponential, leaving a
Gaussian smoothing of V+W along the straight line between the endpoints.
Upper bound: the time average is moved outside, leaving an s-integral of
Gaussian expectations of exp(-tau (V+W)).  Both inner integrals use the
substitution y = sqrt(s(1-s)) u, which makes the Gaussian weight
s-independent.  For constant potentials both bounds saturate to the exact
kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergentIntegralError, DomainError
from .numerics import (
    REL_TOL_2D,
    beta_weight_integral,
    gaussian_abs_moment,
    gaussian_expectation,
    gaussian_shifted_abs_moment,
    integrate_unit_interval,
)
from .potentials import (
    CompositeForm,
    MomentumForm,
    ScalarPotential,
    ZERO_W,
)

LOWER = "lower"
UPPER = "upper"


@dataclass(frozen=True)
class BoundValue:
    value: float
    side: str
    abs_error_estimate: float
    tau: float
    eta: float
    etap: float
    p: np.ndarray

    def __post_init__(self):
        if self.value < 0:
            raise DomainError("bound values are nonnegative")


def _vw_scalar(vform, w, p):
    """(V+W)(x) at fixed p as a scalar power-law sum (plus an optional
    constant from a composite l-matrix)."""
    terms = []
    const = 0.0
    if vform is not None:
        if isinstance(vform, CompositeForm):
            raise DomainError(
                "bounds for composite forms are evaluated on their bracketing "
                "power-law forms (use CompositeForm.bracketing())"
            )
        terms.extend(vform.powerlaw_terms_for(p))
    terms.extend(w.terms)
    terms = [t for t in terms if t.amplitude != 0.0]
    return terms, const


def _require_exponents(terms, floor, what):
    for t in terms:
        if t.exponent <= floor:
            raise DivergentIntegralError(
                f"{what}: exponent {t.exponent} <= {floor} makes the "
                "smoothing integral divergent"
            )


def _endpoint_weight(terms, eta, etap):
    """Endpoint exponent of the inner Gaussian smoothing as s -> 0 or 1:
    when an endpoint sits exactly on a singular center the smoothed value
    behaves like (s(1-s))^nu."""
    w = 0.0
    for t in terms:
        if t.exponent < 0 and (t.center == eta or t.center == etap):
            w = min(w, 0.5 * t.exponent)
    return w


def _eval_terms(terms, x):
    out = 0.0
    for t in terms:
        out += t(x)
    return out


def lower_bound_kernel(
    eta: float,
    etap: float,
    tau: float,
    p,
    vform: MomentumForm,
    w: ScalarPotential = ZERO_W,
    rel_tol: float = REL_TOL_2D,
) -> BoundValue:
    """Jensen lower bound: pref * exp(-tau * smoothed integral of V+W)."""
    if tau <= 0:
        raise DomainError("tau must be positive")
    p = np.atleast_1d(np.asarray(p, dtype=float))
    terms, const = _vw_scalar(vform, w, p)
    _require_exponents(terms, -1.0, "lower bound")

    sqrt_tau = math.sqrt(tau)
    w_end = _endpoint_weight(terms, eta, etap)

    def smoothed(s):
        """Inner Gaussian expectation in closed form (shifted absolute
        moments of the normal law), divided by the declared endpoint weight
        so the outer integrand stays bounded."""
        c = eta + s * (etap - eta)
        scale = sqrt_tau * math.sqrt(s * (1.0 - s))
        val = const
        for t in terms:
            if t.exponent == 0.0 or scale == 0.0:
                val += t(c)
            else:
                val += (
                    t.amplitude
                    * scale**t.exponent
                    * gaussian_shifted_abs_moment(
                        t.exponent, (c - t.center) / scale
                    )
                )
        return val / (s * (1.0 - s)) ** w_end

    res = integrate_unit_interval(smoothed, endpoint_exponent=w_end,
                                  rel_tol=rel_tol)
    pref = (2.0 * math.pi * tau) ** -0.5 * math.exp(
        -((etap - eta) ** 2) / (2.0 * tau)
    )
    value = pref * math.exp(-tau * res.value)
    err = value * tau * res.abs_error_estimate
    return BoundValue(value, LOWER, err, tau, eta, etap, p)


def upper_bound_kernel(
    eta: float,
    etap: float,
    tau: float,
    p,
    vform: MomentumForm,
    w: ScalarPotential = ZERO_W,
    rel_tol: float = REL_TOL_2D,
) -> BoundValue:
    """Jensen upper bound: pref * int_0^1 ds E_u[exp(-tau (V+W)(...))]."""
    if tau <= 0:
        raise DomainError("tau must be positive")
    p = np.atleast_1d(np.asarray(p, dtype=float))
    terms, const = _vw_scalar(vform, w, p)
    _require_exponents(terms, -2.0, "upper bound")

    sqrt_tau = math.sqrt(tau)

    def outer(s):
        c = eta + s * (etap - eta)
        scale = sqrt_tau * math.sqrt(s * (1.0 - s))

        def f(u):
            return math.exp(-tau * (_eval_terms(terms, c + scale * u) + const))

        if scale > 0.0:
            kinks = [(t.center - c) / scale for t in terms if t.exponent != 0]
        else:
            kinks = ()
        return gaussian_expectation(f, rel_tol=0.1 * rel_tol,
                                    breakpoints=kinks).value

    res = integrate_unit_interval(outer, endpoint_exponent=0.0, rel_tol=rel_tol)
    pref = (2.0 * math.pi * tau) ** -0.5 * math.exp(
        -((etap - eta) ** 2) / (2.0 * tau)
    )
    value = pref * res.value
    err = pref * res.abs_error_estimate
    return BoundValue(value, UPPER, err, tau, eta, etap, p)


def h_form(vform: MomentumForm) -> np.ndarray:
    """Gaussian average of the matrix Vt: symmetric d x d, finite for
    exponents 2 nu > -1."""
    if isinstance(vform, CompositeForm):
        raise DomainError("use the bracketing forms for composite potentials")
    probe = vform.powerlaw_terms_for(np.ones(vform.d))
    _require_exponents([t for t in probe if t.amplitude > 0], -1.0, "h form")
    d = vform.d
    h = np.zeros((d, d))
    for i in range(d):
        for j in range(i, d):
            val = gaussian_expectation(
                lambda y, i=i, j=j: float(vform.matrix(y)[i, j])
            ).value
            h[i, j] = h[j, i] = val
    return h


def b_const(w: ScalarPotential) -> float:
    """Gaussian average of W; finite for exponents 2 sigma > -1."""
    _require_exponents([t for t in w.terms if t.amplitude > 0], -1.0, "B constant")
    if w.is_zero:
        return 0.0
    res = gaussian_expectation(lambda y: float(_eval_terms(w.terms, y)))
    if res.value < 0:
        raise DomainError("B must be nonnegative")
    return res.value


def closed_lower_scale_invariant(
    tau: float, p, nu: float, sigma: float, h: np.ndarray, b: float
) -> BoundValue:
    """Scale-invariant closed form of the lower bound at eta = etap = 0:
    pref * exp(-tau^(1+nu) p.h.p Beta(nu) - B tau^(1+sigma) Beta(sigma))."""
    if tau <= 0:
        raise DomainError("tau must be positive")
    if nu <= -0.5:
        raise DivergentIntegralError(
            f"closed lower bound needs nu > -1/2, got {nu}"
        )
    if b != 0.0 and sigma <= -0.5:
        raise DivergentIntegralError(
            f"closed lower bound needs sigma > -1/2, got {sigma}"
        )
    p = np.atleast_1d(np.asarray(p, dtype=float))
    php = float(p @ np.asarray(h) @ p)
    exponent = tau ** (1.0 + nu) * php * beta_weight_integral(nu)
    if b != 0.0:
        exponent += b * tau ** (1.0 + sigma) * beta_weight_integral(sigma)
    pref = (2.0 * math.pi * tau) ** -0.5
    value = pref * math.exp(-exponent)
    return BoundValue(value, LOWER, value * 1e-12, tau, 0.0, 0.0, p)


def h_isotropic(amplitude: float, two_nu: float, d: int) -> np.ndarray:
    """Closed form of h_form for a single centered isotropic power law."""
    return amplitude * gaussian_abs_moment(two_nu) * np.eye(d)
