"""Position-space upper bound and its Bessel-integral momentum form.

These are the deterministic integral representations obtained by doing the
tau-integral of the upper bound exactly: in momentum space it collapses onto
the modified Bessel function K0, in position space onto an algebraic
(s, y) double integral.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DivergentIntegralError, DomainError, SingularityError
from .green import ScalingFit, fit_scaling_exponent
from .numerics import REL_TOL_2D, bessel_k0
from .potentials import DiagonalForm, IsotropicForm, MomentumForm

INNER_LIMIT = 200


@dataclass(frozen=True)
class PositionGreensValue:
    value: float
    error: float
    eta: float
    x: np.ndarray
    etap: float
    xp: np.ndarray
    d: int

    def __post_init__(self):
        if self.value <= 0:
            raise DomainError("position-space upper bound must be positive")


def _isotropic_scalar(vform: MomentumForm):
    if isinstance(vform, IsotropicForm):
        return vform.scalar, [t.center for t in vform.terms if t.exponent != 0]
    raise DomainError("this representation needs an isotropic momentum form")


def _split_points(candidates, lo=-np.inf, hi=np.inf):
    pts = sorted({float(c) for c in candidates if lo < c < hi})
    return pts


def _integrate_line(f, breakpoints, rel_tol):
    """Adaptive integral over the whole real line, split at the given
    breakpoints so singular or kinked points sit at panel endpoints."""
    pts = _split_points(breakpoints)
    edges = [-np.inf] + pts + [np.inf]
    total = 0.0
    err = 0.0
    with warnings.catch_warnings():
        # Far tails underflow to exactly 0 and the breakpoints carry
        # integrable singularities; QUADPACK warns about both even though
        # the panel values converge.
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(f, a, b, epsrel=rel_tol, epsabs=1e-300,
                                  limit=INNER_LIMIT)
            total += v
            err += e
    return total, err


def gu_momentum_bessel(
    eta: float,
    etap: float,
    p,
    vform: MomentumForm,
    rel_tol: float = REL_TOL_2D,
):
    """Upper bound on the momentum-space Green's function as a K0 double
    integral (the tau-integral done exactly; W = 0 by construction)."""
    from .green import GreensValue, UPPER, k0_double_integral

    p = np.atleast_1d(np.asarray(p, dtype=float))
    scalar, centers = _isotropic_scalar(vform)
    p2 = float(np.dot(p, p))
    if p2 <= 0:
        raise DomainError("this representation needs p != 0")

    val, err = k0_double_integral(
        eta, etap, lambda y: p2 * float(scalar(y)), centers, rel_tol=rel_tol
    )
    return GreensValue(val, UPPER, err, eta, etap, p)


def _large_y_exponent(vform):
    if isinstance(vform, IsotropicForm):
        return 0.5 * max(t.exponent for t in vform.terms if t.amplitude > 0)
    if isinstance(vform, DiagonalForm):
        return 0.5 * max(t.exponent for t in vform.terms if t.amplitude > 0)
    raise DomainError("unsupported form for the position representation")


def _position_prefactor(d: int) -> float:
    """Normalization of the (s, y) double integral, fixed so that v = 1
    reproduces the free-field closed form exactly: for constant v the inner
    y-integral contributes sqrt(pi) Gamma((d-1)/2) / Gamma(d/2) times the
    bracket power, which this constant divides back out."""
    from .numerics import gamma_fn

    return (
        (2.0 * math.pi) ** (-(d + 1) / 2.0)
        * gamma_fn(0.5 * d)
        / (math.sqrt(math.pi) * gamma_fn(0.5 * (d - 1)))
    )


def gu_position(
    eta: float,
    x,
    etap: float,
    xp,
    vform: MomentumForm,
    d: int | None = None,
    rel_tol: float = REL_TOL_2D,
) -> PositionGreensValue:
    """Position-space upper bound on the Green's function: algebraic
    (s, y) double integral (isotropic or diagonal momentum forms)."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if d is None:
        d = vform.d
    if d < 2:
        raise DomainError("position representation requires d >= 2")
    if x.shape != (d,) or xp.shape != (d,):
        raise DomainError(f"x and xp must be vectors of dimension {d}")
    dx = xp - x
    dx2 = float(np.dot(dx, dx))
    deta = etap - eta
    if dx2 == 0.0 and deta == 0.0:
        raise SingularityError("coincident points: the upper bound diverges")
    rho = _large_y_exponent(vform)
    if rho <= -1.0 + 1.0 / d:
        raise DivergentIntegralError(
            f"large-y exponent rho = {rho} <= -1 + 1/{d}: integral diverges"
        )

    if isinstance(vform, IsotropicForm):
        scalar = vform.scalar
        centers = [t.center for t in vform.terms if t.exponent != 0]

        def bracket(y, s, ss, line):
            v = float(scalar(y))
            return dx2 + v * deta * deta + v * (y - line) ** 2 / ss
    else:
        # Diagonal: det(Vt)^(-1/2) (dx . Vt^-1 . dx + ...)^(-d/2).
        centers = [t.center for t in vform.terms if t.exponent != 0]

        def bracket(y, s, ss, line):
            diag = np.array([float(t(y)) for t in vform.terms])
            if np.any(diag <= 0):
                return math.inf
            detv = float(np.prod(diag))
            quad = float(np.sum(dx * dx / diag))
            base = quad + deta * deta + (y - line) ** 2 / ss
            return detv ** (1.0 / d) * base  # fold det into the bracket

    def outer(theta):
        s = math.sin(0.5 * theta) ** 2
        ss = s * (1.0 - s)
        line = eta + s * deta

        def inner(y):
            b = bracket(y, s, ss, line)
            if not math.isfinite(b) or b <= 0:
                return 0.0
            return b ** (-0.5 * d)

        val, _ = _integrate_line(inner, centers + [line], 0.1 * rel_tol)
        return val

    val, err = integrate.quad(outer, 0.0, math.pi, epsrel=rel_tol,
                              epsabs=1e-300, limit=INNER_LIMIT)
    pref = _position_prefactor(d)
    return PositionGreensValue(
        value=pref * val,
        error=pref * err,
        eta=eta,
        x=x,
        etap=etap,
        xp=xp,
        d=d,
    )


def free_field_position(dx2_plus_deta2: float, d: int) -> float:
    """Closed form of the free-field position Green's function bound:
    (2 pi)^(-(d+1)/2) (|dx|^2 + deta^2)^(-(d-1)/2)."""
    return (2.0 * math.pi) ** (-(d + 1) / 2.0) * dx2_plus_deta2 ** (
        -(d - 1) / 2.0
    )


def momentum_scaling_window(
    nu: float,
    theta: float,
    thetap: float,
    p_grid,
    vform: MomentumForm,
    rel_tol: float = REL_TOL_2D,
) -> ScalingFit:
    """Slope of the Bessel-form upper bound along the co-scaled trajectory
    eta = |p|^(-1/(1+nu)) theta; the target is -2 omega(nu)."""
    if nu <= -0.5:
        raise DomainError(f"scaling window requires nu > -1/2, got {nu}")
    samples = []
    for p_abs in np.atleast_1d(p_grid):
        p_abs = float(p_abs)
        scale = p_abs ** (-1.0 / (1.0 + nu))
        g = gu_momentum_bessel(
            scale * theta, scale * thetap, np.array([p_abs]), vform,
            rel_tol=rel_tol,
        )
        samples.append((p_abs, g.value, g.error))
    return fit_scaling_exponent(samples)


def large_distance_decay(
    vform: MomentumForm,
    eta: float,
    etap: float,
    dx_grid,
    d: int,
    rel_tol: float = REL_TOL_2D,
    residual_threshold: float = 0.05,
) -> tuple[ScalingFit, bool]:
    """Fitted decay slope of the position upper bound over a |dx| window.

    Returns (fit, inconclusive): inconclusive is set (not an error) when the
    residual indicates the window is not asymptotic.
    """
    samples = []
    for r in np.atleast_1d(dx_grid):
        r = float(r)
        x = np.zeros(d)
        xp = np.zeros(d)
        xp[0] = r
        g = gu_position(eta, x, etap, xp, vform, d=d, rel_tol=rel_tol)
        samples.append((r, g.value, g.error))
    fit = fit_scaling_exponent(samples)
    return fit, fit.residual_rms > residual_threshold
