"""Green's functions: tau-integration of kernels and bounds, anomalous
scaling exponent, sandwich verification and log-log exponent fitting."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from scipy import integrate

from . import bounds as bounds_mod
from . import kernel as kernel_mod
from .errors import DivergentIntegralError, DomainError
from .numerics import (
    REL_TOL_2D,
    bessel_k0,
    beta_weight_integral,
    gamma_fn,
    gaussian_abs_moment,
    integrate_semi_infinite,
)
from .potentials import (
    CompositeForm,
    IsotropicForm,
    MomentumForm,
    PowerLawTerm,
    ScalarPotential,
    ZERO_W,
)

MC = "mc"
LOWER = "lower"
UPPER = "upper"
FREE_FIELD = "free_field"


@dataclass(frozen=True)
class GreensValue:
    value: float
    method: str
    error: float
    eta: float
    etap: float
    p: np.ndarray

    def __post_init__(self):
        if self.value < 0:
            raise DomainError("Green's function values are nonnegative")


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    amplitude: float
    residual_rms: float
    window: tuple[float, float]
    n_points: int

    def __post_init__(self):
        if self.n_points < 3:
            raise DomainError("a scaling fit needs at least 3 points")
        if not self.window[0] < self.window[1]:
            raise DomainError("fit window must have min < max")


def omega(nu: float) -> float:
    """Anomalous momentum exponent 1 / (2 (1 + nu))."""
    if nu <= -1:
        raise DomainError(f"omega requires nu > -1, got {nu}")
    return 0.5 / (1.0 + nu)


def lower_bound_green_constant(nu: float) -> float:
    """Amplitude K1 of the closed-form lower bound on the equal-hyperplane
    Green's function: G_L = K1 * ((p.h.p) Beta(nu))^(-omega)."""
    if nu <= -0.5:
        raise DomainError(f"lower-bound constant requires nu > -1/2, got {nu}")
    om = omega(nu)
    return (2.0 * math.pi) ** -0.5 * gamma_fn(om) / (1.0 + nu)


def _dominant_decay_power(vform, w, p):
    """Largest 1 + nu over active potential terms: the tau -> infinity decay
    rate exponent of the kernel (used for the tail change of variable)."""
    exps = []
    if vform is not None and float(np.dot(p, p)) > 0:
        terms = vform.powerlaw_terms_for(p)
        if terms is not None:
            exps.extend(t.exponent for t in terms if t.amplitude > 0)
        else:
            exps.append(0.0)
    exps.extend(t.exponent for t in w.terms if t.amplitude > 0)
    if not exps:
        return None
    return 1.0 + 0.5 * max(exps)


def k0_double_integral(
    eta: float,
    etap: float,
    energy_fn,
    centers=(),
    rel_tol: float = REL_TOL_2D,
):
    """(1/pi) int_0^pi d theta int dy K0(sqrt(2 M(y,s) E(y))) with
    s = sin^2(theta/2), M = (eta'-eta)^2 + (y - eta - s(eta'-eta))^2/(s(1-s)).

    This is the tau-integral of the upper-bound kernel done exactly: the
    tau-dependence of the prefactor, of the bridge-variance Gaussian and of
    exp(-tau E) collapses onto the modified Bessel function K0.  E(y) is the
    total potential (p.Vt(y).p + W(y)); centers flags its singular or kinked
    points for the inner quadrature.
    """
    deta = etap - eta

    def outer(theta):
        s = math.sin(0.5 * theta) ** 2
        ss = s * (1.0 - s)
        line = eta + s * deta

        def inner(y):
            e = float(energy_fn(y))
            if e <= 0.0:
                return 0.0
            m = deta * deta + (y - line) ** 2 / ss
            arg = math.sqrt(2.0 * m * e)
            if arg > 740.0:
                return 0.0
            if arg == 0.0:
                return 0.0
            return bessel_k0(arg)

        pts = sorted({float(c) for c in centers} | {line})
        total = 0.0
        edges = [-np.inf] + pts + [np.inf]
        with warnings.catch_warnings():
            # The K0 tail underflows to exactly 0 far from the centers and
            # has a log endpoint singularity where M or E vanish; QUADPACK
            # warns about both even though the panel values converge.
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for a, b in zip(edges[:-1], edges[1:]):
                v, _ = integrate.quad(
                    a=a, b=b, func=inner, epsrel=0.1 * rel_tol,
                    epsabs=1e-300, limit=200,
                )
                total += v
        return total

    val, err = integrate.quad(outer, 0.0, math.pi, epsrel=rel_tol,
                              epsabs=1e-300, limit=200)
    return val / math.pi, err / math.pi


def _isotropic_energy(p, vform, w):
    """Total potential E(y) = p.Vt(y).p + W(y) as a scalar callable when the
    momentum form is isotropic (or absent); returns (E, centers) or None."""
    p2 = float(np.dot(p, p))
    if vform is None or p2 == 0.0:
        if w.is_zero:
            return None
        centers = [t.center for t in w.terms if t.exponent != 0]
        return (lambda y: sum(t(y) for t in w.terms)), centers
    if not isinstance(vform, IsotropicForm):
        return None
    scalar = vform.scalar
    centers = [t.center for t in vform.terms if t.exponent != 0]
    centers += [t.center for t in w.terms if t.exponent != 0]
    if w.is_zero:
        return (lambda y: p2 * float(scalar(y))), centers

    def energy(y):
        return p2 * float(scalar(y)) + sum(t(y) for t in w.terms)

    return energy, centers


def _centered_power_terms(eta, etap, p, vform, w):
    """When eta = etap and every active power-law term is centered there,
    the lower bound's Gaussian smoothing has the closed form
    sum_t c_t tau^(1+nu_t); returns the (c_t, 1+nu_t) pairs or None."""
    if eta != etap:
        return None
    terms = []
    if vform is not None and float(np.dot(p, p)) > 0:
        pl = vform.powerlaw_terms_for(p)
        if pl is None:
            return None
        terms.extend(pl)
    terms.extend(w.terms)
    terms = [t for t in terms if t.amplitude != 0.0]
    pairs = []
    for t in terms:
        if t.exponent != 0.0 and t.center != eta:
            return None
        if t.exponent <= -1.0:
            raise DivergentIntegralError(
                f"lower bound: exponent {t.exponent} <= -1 makes the "
                "smoothing integral divergent"
            )
        coef = (
            t.amplitude
            * beta_weight_integral(0.5 * t.exponent)
            * gaussian_abs_moment(t.exponent)
        )
        pairs.append((coef, 1.0 + 0.5 * t.exponent))
    return pairs


def green_momentum(
    eta: float,
    etap: float,
    p,
    vform: MomentumForm,
    w: ScalarPotential = ZERO_W,
    method: str = LOWER,
    rel_tol: float = REL_TOL_2D,
    n_paths: int = 20_000,
    n_steps: int = kernel_mod.DEFAULT_N_STEPS,
    seed: int = 0,
    n_tau: int = 48,
    tau_quadrature: bool = False,
) -> GreensValue:
    """Green's function as the tau-integral of the kernel (or its bounds).

    The bound methods use exact shortcuts where available (closed-form
    smoothing exponents for the lower bound, the K0 collapse of the
    tau-integral for the upper bound); tau_quadrature=True forces the
    direct semi-infinite quadrature of the bound kernels instead.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    decay = _dominant_decay_power(vform, w, p)
    if decay is None:
        raise DivergentIntegralError(
            "no decay in tau: p = 0 with W = 0 has a divergent tau-integral"
        )
    small_exp = -0.5 if eta == etap else 0.0

    if method == LOWER and not tau_quadrature:
        pairs = _centered_power_terms(eta, etap, p, vform, w)
        if pairs is not None:

            def f(tau):
                phi = sum(c * tau**q for c, q in pairs)
                return (2.0 * math.pi * tau) ** -0.5 * math.exp(-phi)

            res = integrate_semi_infinite(
                f, small_tau_exponent=small_exp, decay_power=decay,
                rel_tol=max(rel_tol, 1e-8),
            )
            return GreensValue(
                res.value, method, res.abs_error_estimate, eta, etap, p
            )

    if method == UPPER and not tau_quadrature:
        energy = _isotropic_energy(p, vform, w)
        if energy is not None:
            energy_fn, centers = energy
            val, err = k0_double_integral(
                eta, etap, energy_fn, centers, rel_tol=rel_tol
            )
            return GreensValue(val, method, err, eta, etap, p)

    if method in (LOWER, UPPER):
        fn = (
            bounds_mod.lower_bound_kernel
            if method == LOWER
            else bounds_mod.upper_bound_kernel
        )

        def f(tau):
            return fn(eta, etap, tau, p, vform, w, rel_tol=rel_tol).value

        res = integrate_semi_infinite(
            f, small_tau_exponent=small_exp, decay_power=decay,
            rel_tol=max(rel_tol, 1e-8),
        )
        return GreensValue(res.value, method, res.abs_error_estimate, eta, etap, p)

    if method == MC:
        return _green_mc(eta, etap, p, vform, w, n_paths, n_steps, seed, n_tau)

    raise DomainError(f"unknown method {method!r}")


def _mc_tau_scale(p, vform, w):
    """Natural tau scale: (p.h.p)^(-1/(1+nu)) for the leading singular term
    (h via its closed form when available), else 1."""
    try:
        if isinstance(vform, IsotropicForm) and float(np.dot(p, p)) > 0:
            lead = min(vform.terms, key=lambda t: t.exponent)
            php = (
                float(np.dot(p, p))
                * bounds_mod.h_isotropic(lead.amplitude, lead.exponent, 1)[0, 0]
            )
            if php > 0:
                return php ** (-1.0 / (1.0 + lead.nu))
    except DivergentIntegralError:
        pass
    return 1.0


def _green_mc(eta, etap, p, vform, w, n_paths, n_steps, seed, n_tau):
    tau_c = _mc_tau_scale(p, vform, w)
    taus = np.logspace(math.log10(tau_c) - 3, math.log10(tau_c) + 3, n_tau)
    means = np.empty(n_tau)
    errs = np.empty(n_tau)
    for i, tau in enumerate(taus):
        est = kernel_mod.fk_kernel_momentum(
            eta, etap, tau, p, vform, w,
            n_paths=n_paths, n_steps=n_steps, seed=seed,
            stream_offset=i * 1000,
        )
        means[i] = est.mean
        errs[i] = est.std_error
    value = float(np.trapezoid(means, taus))
    # Head correction: the integrand is ~ c tau^(-1/2) below the first grid
    # point when eta = etap, so the [0, tau_min] piece is ~ 2 tau_min f(tau_min).
    head = 2.0 * taus[0] * means[0] if eta == etap else 0.0
    value += head
    weights = np.gradient(taus)
    stat_err = float(np.sqrt(np.sum((weights * errs) ** 2)))
    # Quadrature bias of the trapezoid rule via Richardson: the grid at half
    # resolution has ~4x the error, so (coarse - fine) / 3 estimates the
    # fine-grid bias.  This dominates the statistical error when the
    # integrand variance is small (e.g. near-constant potentials).
    coarse = float(np.trapezoid(means[::2], taus[::2])) + head
    quad_err = abs(value - coarse) / 3.0
    err = math.hypot(stat_err, quad_err)
    return GreensValue(value, MC, err, eta, etap, p)


def fit_scaling_exponent(
    samples: Sequence[tuple[float, float, float]]
) -> ScalingFit:
    """Weighted least squares of log(value) against log(abscissa).

    samples is a sequence of (abscissa, value, error); errors of 0 give an
    unweighted fit.
    """
    if len(samples) < 3:
        raise DomainError("need at least 3 samples for a scaling fit")
    x = np.array([s[0] for s in samples], dtype=float)
    y = np.array([s[1] for s in samples], dtype=float)
    e = np.array([s[2] for s in samples], dtype=float)
    if np.any(y <= 0) or np.any(x <= 0):
        raise DomainError("scaling fits need positive abscissas and values")
    if len(np.unique(x)) != len(x):
        raise DomainError("abscissas must be distinct")
    lx, ly = np.log(x), np.log(y)
    rel = np.where(y > 0, e / y, 0.0)
    wts = np.where(rel > 0, 1.0 / np.maximum(rel, 1e-12) ** 2, 1.0)
    if np.any(rel > 0):
        wts = np.where(rel > 0, wts, wts.max())
    wsum = wts.sum()
    mx = np.sum(wts * lx) / wsum
    my = np.sum(wts * ly) / wsum
    cov = np.sum(wts * (lx - mx) * (ly - my))
    var = np.sum(wts * (lx - mx) ** 2)
    slope = cov / var
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    return ScalingFit(
        exponent=float(slope),
        amplitude=float(math.exp(intercept)),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        window=(float(x.min()), float(x.max())),
        n_points=len(x),
    )


@dataclass(frozen=True)
class SandwichPoint:
    p: np.ndarray
    lower: GreensValue
    mc: GreensValue
    upper: GreensValue
    pass_lower: bool
    pass_upper: bool

    @property
    def ok(self):
        return self.pass_lower and self.pass_upper


def sandwich_check(
    p_grid,
    vform: MomentumForm,
    w: ScalarPotential = ZERO_W,
    eta: float = 0.0,
    etap: float = 0.0,
    n_paths: int = 20_000,
    n_steps: int = kernel_mod.DEFAULT_N_STEPS,
    seed: int = 0,
    n_sigma: float = 3.0,
    min_abs_p: float = 0.0,
) -> list[SandwichPoint]:
    """Per-momentum verification G_L <= G_MC <= G_U (within n_sigma errors).

    For composite forms the bounds are computed on the bracketing power-law
    forms with the l-term handled as a constant shift of the potential.
    """
    lower_form, upper_form = vform, vform
    l_low = l_up = None
    if isinstance(vform, CompositeForm):
        lf, ll, uf, lu = vform.bracketing()
        # Lower Green's bound uses the *upper* bracketing potential and vice
        # versa (more potential means a smaller kernel).
        lower_form, upper_form = uf, lf
        l_low, l_up = lu, ll
    out = []
    for i, p in enumerate(np.atleast_1d(np.asarray(p_grid, dtype=object))):
        pv = np.atleast_1d(np.asarray(p, dtype=float))
        if np.linalg.norm(pv) < min_abs_p:
            raise DomainError(
                f"|p| = {np.linalg.norm(pv)} below the momentum threshold "
                f"{min_abs_p}"
            )
        w_low = _with_l_shift(w, pv, l_low)
        w_up = _with_l_shift(w, pv, l_up)
        g_low = green_momentum(eta, etap, pv, lower_form, w_low, method=LOWER)
        g_up = green_momentum(eta, etap, pv, upper_form, w_up, method=UPPER)
        g_mc = green_momentum(
            eta, etap, pv, vform, w, method=MC,
            n_paths=n_paths, n_steps=n_steps, seed=seed + i,
        )
        tol = n_sigma * g_mc.error
        out.append(
            SandwichPoint(
                p=pv,
                lower=g_low,
                mc=g_mc,
                upper=g_up,
                pass_lower=g_low.value - g_low.error <= g_mc.value + tol,
                pass_upper=g_mc.value - tol <= g_up.value + g_up.error,
            )
        )
    return out


def _with_l_shift(w, p, l_matrix):
    if l_matrix is None:
        return w
    shift = float(p @ l_matrix @ p)
    if shift == 0.0:
        return w
    return ScalarPotential(tuple(w.terms) + (PowerLawTerm(shift, 0.0),))


def kernel_sandwich_check(
    tau_grid,
    p_grid,
    vform: MomentumForm,
    w: ScalarPotential = ZERO_W,
    eta: float = 0.0,
    etap: float = 0.0,
    n_paths: int = kernel_mod.DEFAULT_N_PATHS,
    n_steps: int = kernel_mod.DEFAULT_N_STEPS,
    seed: int = 0,
    n_sigma: float = 3.0,
):
    """Kernel-level sandwich P_L <= MC <= P_U on a (tau, p) grid; returns a
    list of dicts with the three values and pass flags."""
    rows = []
    for i, tau in enumerate(np.atleast_1d(tau_grid)):
        for j, p in enumerate(np.atleast_1d(np.asarray(p_grid, dtype=object))):
            pv = np.atleast_1d(np.asarray(p, dtype=float))
            lo = bounds_mod.lower_bound_kernel(eta, etap, float(tau), pv, vform, w)
            up = bounds_mod.upper_bound_kernel(eta, etap, float(tau), pv, vform, w)
            mc = kernel_mod.fk_kernel_momentum(
                eta, etap, float(tau), pv, vform, w,
                n_paths=n_paths, n_steps=n_steps, seed=seed,
                stream_offset=(i * 97 + j) * 1000,
            )
            tol = n_sigma * mc.std_error
            rows.append(
                {
                    "tau": float(tau),
                    "p": pv,
                    "lower": lo.value,
                    "mc": mc.mean,
                    "mc_std_error": mc.std_error,
                    "upper": up.value,
                    "pass_lower": lo.value - lo.abs_error_estimate <= mc.mean + tol,
                    "pass_upper": mc.mean - tol <= up.value + up.abs_error_estimate,
                }
            )
    return rows


def zero_momentum_finiteness(w: ScalarPotential, rel_tol: float = REL_TOL_2D) -> GreensValue:
    """Finite upper bound on G(0,0;0) for strictly positive W (V drops out
    at p = 0); W = 0 has no tau-decay and is an error."""
    if w.is_zero:
        raise DivergentIntegralError(
            "W = 0 gives no decay in tau: the zero-momentum Green's function "
            "diverges"
        )
    for t in w.terms:
        if t.amplitude > 0 and t.exponent <= -1.0:
            raise DivergentIntegralError(
                f"sigma = {0.5 * t.exponent} <= -1/2 is outside the finiteness range"
            )
    p0 = np.zeros(1)
    energy_fn, centers = _isotropic_energy(p0, None, w)
    val, err = k0_double_integral(0.0, 0.0, energy_fn, centers, rel_tol=rel_tol)
    return GreensValue(val, UPPER, err, 0.0, 0.0, p0)


@dataclass(frozen=True)
class ShiftReport:
    centered: float
    shifted: float
    max_rel_deviation: float
    method: str


def shifted_center_equivalence(
    nu: float,
    eta0: float,
    p=2.0,
    tau: float = 1.0,
    amplitude: float = 1.0,
    method: str = LOWER,
    n_paths: int = 20_000,
    seed: int = 123,
) -> ShiftReport:
    """Results at eta = etap = eta0 for a potential centered at eta0 match
    the centered potential evaluated at 0."""
    pv = np.atleast_1d(np.asarray(p, dtype=float))
    centered = IsotropicForm(len(pv), (PowerLawTerm(amplitude, 2 * nu, 0.0),))
    shifted = IsotropicForm(len(pv), (PowerLawTerm(amplitude, 2 * nu, eta0),))
    if method in (LOWER, UPPER):
        fn = (
            bounds_mod.lower_bound_kernel
            if method == LOWER
            else bounds_mod.upper_bound_kernel
        )
        a = fn(0.0, 0.0, tau, pv, centered).value
        b = fn(eta0, eta0, tau, pv, shifted).value
    elif method == MC:
        a = kernel_mod.fk_kernel_momentum(
            0.0, 0.0, tau, pv, centered, n_paths=n_paths, seed=seed
        ).mean
        b = kernel_mod.fk_kernel_momentum(
            eta0, eta0, tau, pv, shifted, n_paths=n_paths, seed=seed
        ).mean
    else:
        raise DomainError(f"unknown method {method!r}")
    dev = abs(a - b) / max(abs(a), 1e-300)
    return ShiftReport(centered=a, shifted=b, max_rel_deviation=dev, method=method)
