"""Momentum-form potentials V = p.Vt(eta).p and scalar potentials W(eta).

The closed family supported here is sums of power laws
``amplitude * |eta - center|^exponent`` (the exponent field stores 2*nu),
optionally wrapped in a composite form ``base(eta) * f(eta) + l`` with a
bounded f and a constant nonnegative matrix l, plus potentials generated
from power-law metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, SingularityError

# Exponent floors (in the stored 2*nu convention): lower-bound closed forms
# need 2*nu > -1, upper bounds and Monte Carlo path integrability admit
# 2*nu > -1 as well for W but only > -2 for the upper-bound-only analysis.
EXP_FLOOR_LOWER = -1.0
EXP_FLOOR_UPPER = -2.0


@dataclass(frozen=True)
class PowerLawTerm:
    """One power-law summand amplitude * |eta - center|^exponent.

    ``exponent`` stores 2*nu (momentum form) or 2*sigma (scalar potential).
    """

    amplitude: float
    exponent: float
    center: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise DomainError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.exponent <= EXP_FLOOR_UPPER:
            raise DomainError(
                f"exponent 2*nu = {self.exponent} <= -2 lies outside every "
                "supported analysis mode"
            )

    @property
    def nu(self) -> float:
        return 0.5 * self.exponent

    def __call__(self, eta):
        x = np.abs(np.asarray(eta, dtype=float) - self.center)
        if self.exponent == 0.0:
            return self.amplitude * np.ones_like(x)
        return self.amplitude * x**self.exponent


def _check_not_at_center(eta, terms):
    for t in terms:
        if t.exponent < 0 and t.amplitude > 0 and float(eta) == t.center:
            raise SingularityError(
                f"evaluation exactly at singular center eta = {t.center} "
                f"(exponent {t.exponent})"
            )


class MomentumForm:
    """Base class; evaluation yields a symmetric PSD d x d matrix Vt(eta)."""

    d: int

    def matrix(self, eta: float) -> np.ndarray:
        raise NotImplementedError

    def trace(self, eta) -> np.ndarray:
        """Tr Vt(eta); vectorized over eta."""
        raise NotImplementedError

    def powerlaw_terms_for(self, p) -> list[PowerLawTerm] | None:
        """If p.Vt(eta).p is a sum of power laws in eta, return the terms
        (amplitudes already contracted with p); else None."""
        return None

    @property
    def scale_exponent(self) -> float | None:
        """nu when the form is scale invariant about 0, else None."""
        return None


@dataclass(frozen=True)
class IsotropicForm(MomentumForm):
    """Vt(eta) = (sum of power-law terms)(eta) * identity."""

    d: int
    terms: tuple[PowerLawTerm, ...]

    def __post_init__(self):
        if self.d < 1:
            raise DomainError("dimension must be >= 1")
        if not self.terms:
            raise DomainError("isotropic form needs at least one term")
        object.__setattr__(self, "terms", tuple(self.terms))

    def scalar(self, eta):
        return sum(t(eta) for t in self.terms)

    def matrix(self, eta):
        _check_not_at_center(eta, self.terms)
        return float(self.scalar(eta)) * np.eye(self.d)

    def trace(self, eta):
        return self.d * self.scalar(eta)

    def powerlaw_terms_for(self, p):
        p2 = float(np.dot(p, p))
        return [
            PowerLawTerm(t.amplitude * p2, t.exponent, t.center)
            for t in self.terms
        ]

    @property
    def scale_exponent(self):
        if len(self.terms) == 1 and self.terms[0].center == 0.0:
            return self.terms[0].nu
        return None


@dataclass(frozen=True)
class DiagonalForm(MomentumForm):
    """Vt(eta) = diag(term_1(eta), ..., term_d(eta)), one term per axis."""

    terms: tuple[PowerLawTerm, ...]

    def __post_init__(self):
        if not self.terms:
            raise DomainError("diagonal form needs at least one axis term")
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def d(self):
        return len(self.terms)

    def matrix(self, eta):
        _check_not_at_center(eta, self.terms)
        return np.diag([float(t(eta)) for t in self.terms])

    def trace(self, eta):
        return sum(t(eta) for t in self.terms)

    def powerlaw_terms_for(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.d,):
            raise DomainError(f"momentum must have dimension {self.d}")
        return [
            PowerLawTerm(t.amplitude * p[j] ** 2, t.exponent, t.center)
            for j, t in enumerate(self.terms)
            if p[j] != 0.0
        ] or [PowerLawTerm(0.0, 0.0)]

    @property
    def scale_exponent(self):
        exps = {t.exponent for t in self.terms}
        cents = {t.center for t in self.terms}
        if len(exps) == 1 and cents == {0.0}:
            return 0.5 * exps.pop()
        return None


@dataclass(frozen=True)
class CompositeForm(MomentumForm):
    """Vt(eta) = base(eta) * f(eta) + l with f_lower <= f <= f_upper.

    f is a user-supplied bounded function with a strictly positive lower
    bound; l is a constant symmetric nonnegative matrix.
    """

    base: MomentumForm
    f: Callable[[float], float]
    f_lower: float
    f_upper: float
    l_matrix: np.ndarray = None

    def __post_init__(self):
        if not (0 < self.f_lower <= self.f_upper):
            raise DomainError(
                f"need 0 < f_lower <= f_upper, got ({self.f_lower}, {self.f_upper})"
            )
        l = self.l_matrix
        if l is None:
            l = np.zeros((self.base.d, self.base.d))
        l = np.asarray(l, dtype=float)
        if l.shape != (self.base.d, self.base.d) or not np.allclose(l, l.T):
            raise DomainError("l_matrix must be a symmetric d x d matrix")
        if np.any(np.linalg.eigvalsh(l) < -1e-12):
            raise DomainError("l_matrix must be positive semidefinite")
        object.__setattr__(self, "l_matrix", l)

    @property
    def d(self):
        return self.base.d

    def f_checked(self, eta):
        val = float(self.f(eta))
        if not (self.f_lower - 1e-12 <= val <= self.f_upper + 1e-12):
            raise DomainError(
                f"f({eta}) = {val} violates the declared bounds "
                f"[{self.f_lower}, {self.f_upper}]"
            )
        return val

    def matrix(self, eta):
        return self.base.matrix(eta) * self.f_checked(eta) + self.l_matrix

    def trace(self, eta):
        etas = np.asarray(eta, dtype=float)
        flat = np.atleast_1d(etas).ravel()
        fvals = np.array([self.f_checked(e) for e in flat])
        out = self.base.trace(flat) * fvals + np.trace(self.l_matrix)
        return out.reshape(etas.shape) if etas.ndim else float(out[0])

    def bracketing(self):
        """Pure power-law sandwich of the composite form (scale-invariant
        base rescaled by the f bounds): returns (lower_form, l_lower,
        upper_form, l_upper) with V_low + p.l_low.p <= V <= V_up + p.l_up.p.
        """
        lower = _rescale(self.base, self.f_lower)
        upper = _rescale(self.base, self.f_upper)
        zero = np.zeros_like(self.l_matrix)
        return lower, zero, upper, self.l_matrix


def _rescale(form: MomentumForm, factor: float) -> MomentumForm:
    if isinstance(form, IsotropicForm):
        return IsotropicForm(
            form.d,
            tuple(PowerLawTerm(t.amplitude * factor, t.exponent, t.center) for t in form.terms),
        )
    if isinstance(form, DiagonalForm):
        return DiagonalForm(
            tuple(PowerLawTerm(t.amplitude * factor, t.exponent, t.center) for t in form.terms)
        )
    raise DomainError("composite base must be isotropic or diagonal")


@dataclass(frozen=True)
class ScalarPotential:
    """W(eta) as a sum of power-law terms; empty terms means W = 0."""

    terms: tuple[PowerLawTerm, ...] = ()
    nonneg: bool = True

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.nonneg:
            # Spot check on a grid; power-law sums with nonneg amplitudes
            # are nonneg by construction, but composite configs may not be.
            grid = np.linspace(-5, 5, 41)
            grid = grid[grid != 0.0]
            vals = self(grid)
            if np.any(vals < 0):
                raise DomainError("W takes negative values on the check grid")

    def __call__(self, eta):
        if not self.terms:
            return np.zeros_like(np.asarray(eta, dtype=float))
        return sum(t(eta) for t in self.terms)

    @property
    def is_zero(self):
        return all(t.amplitude == 0 for t in self.terms)


ZERO_W = ScalarPotential()


def eval_V(form: MomentumForm, eta: float, p) -> float:
    """p . Vt(eta) . p  (always >= 0 for admissible forms)."""
    p = np.asarray(p, dtype=float)
    m = form.matrix(float(eta))
    val = float(p @ m @ p)
    if val < 0:
        raise DomainError(f"momentum form is not PSD at eta = {eta}")
    return val


def check_scale_invariance(form: MomentumForm, lam: float, eta: float) -> float:
    """Max-norm residual |Vt(lam*eta) - lam^(2 nu) Vt(eta)|."""
    if lam <= 0:
        raise DomainError("scaling factor must be positive")
    nu = form.scale_exponent
    if nu is None:
        # Composite / shifted forms: report the residual against the base
        # exponent when available, else against nu inferred from the first
        # evaluation; they break invariance by construction.
        base = getattr(form, "base", None)
        nu = base.scale_exponent if base is not None else 0.0
        if nu is None:
            nu = 0.0
    a = form.matrix(lam * eta)
    b = lam ** (2.0 * nu) * form.matrix(eta)
    return float(np.max(np.abs(a - b)))


COSMOLOGICAL = "cosmological"
QUANTUM = "quantum_mechanics"


@dataclass(frozen=True)
class MetricModel:
    """Power-law metric a_j = |t|^alpha_j (isotropic when one exponent).

    interpretation selects the coordinate mapping: 'cosmological' (d = 3,
    time-like singular coordinate) or 'quantum_mechanics' (d = 2, space-like).
    """

    spatial_dim: int
    exponents: tuple[float, ...]
    mass: float = 0.0
    coupling_xi: float = 0.0
    interpretation: str = COSMOLOGICAL

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(float(a) for a in self.exponents))
        if self.interpretation not in (COSMOLOGICAL, QUANTUM):
            raise DomainError(f"unknown interpretation {self.interpretation!r}")
        if self.interpretation == COSMOLOGICAL and self.spatial_dim != 3:
            raise DomainError("cosmological interpretation requires d = 3")
        if self.interpretation == QUANTUM and self.spatial_dim != 2:
            raise DomainError("quantum-mechanics interpretation requires d = 2")
        if self.mass < 0:
            raise DomainError("mass must be >= 0")
        if not self.exponents:
            raise DomainError("at least one metric exponent is required")

    @property
    def alpha(self) -> float:
        if len(set(self.exponents)) != 1:
            raise DomainError("isotropic alpha requested for anisotropic metric")
        return self.exponents[0]

    @property
    def excluded_alpha(self) -> float:
        return 1.0 / 3.0 if self.interpretation == COSMOLOGICAL else 0.5


@dataclass(frozen=True)
class MetricPotentials:
    form: MomentumForm
    scalar: ScalarPotential
    nu: float
    sigma: float
    theorem1_regime: bool  # nu > -1/2, lower-bound machinery applies
    b_finite: bool  # |alpha| < 1/3: Gaussian average of W is finite
    kappa: float
    c1: float
    c2: float


def metric_to_potentials(
    model: MetricModel,
    kappa: float = 1.0,
    c1: float = 1.0,
    c2: float = 1.0,
    u_potential: PowerLawTerm | None = None,
) -> MetricPotentials:
    """Compile a power-law metric into (momentum form, scalar potential).

    The amplitudes kappa, c1, c2 are free constants of the mapping and
    default to 1.  For the quantum-mechanics interpretation an optional
    power-law U(eta) multiplies the metric factor in W.
    """
    if model.coupling_xi != 0.0:
        raise DomainError(
            "coupling xi != 0 produces an eta^-2 potential outside the "
            "supported family; only xi = 0 is admitted"
        )
    alpha = model.alpha
    if alpha == model.excluded_alpha:
        raise DomainError(
            f"alpha = {alpha} is the excluded value for {model.interpretation}"
        )

    if model.interpretation == COSMOLOGICAL:
        nu = 2.0 * alpha / (1.0 - 3.0 * alpha)
        sigma = 3.0 * alpha / (1.0 - 3.0 * alpha)
        form = IsotropicForm(3, (PowerLawTerm(kappa, 2.0 * nu),))
        w_terms = ()
        if model.mass > 0:
            w_terms = (PowerLawTerm(c1 * model.mass**2, 2.0 * sigma),)
        scalar = ScalarPotential(w_terms)
        b_finite = abs(alpha) < 1.0 / 3.0
    else:
        nu = alpha / (1.0 - 2.0 * alpha)
        metric_exp = 4.0 * alpha / (1.0 - 2.0 * alpha)
        form = IsotropicForm(2, (PowerLawTerm(kappa * c1, 2.0 * nu),))
        if u_potential is not None:
            w_terms = (
                PowerLawTerm(
                    c2 * u_potential.amplitude,
                    metric_exp + u_potential.exponent,
                    u_potential.center,
                ),
            )
        else:
            w_terms = ()
        scalar = ScalarPotential(w_terms)
        sigma = 0.5 * w_terms[0].exponent if w_terms else 0.0
        b_finite = abs(alpha) < 1.0 / 3.0

    return MetricPotentials(
        form=form,
        scalar=scalar,
        nu=nu,
        sigma=sigma,
        theorem1_regime=nu > -0.5,
        b_finite=b_finite,
        kappa=kappa,
        c1=c1,
        c2=c2,
    )


def curvature_potential(model: MetricModel, eta: float) -> float:
    """g R at eta for scale factors given as power laws of eta.

    For this operation the model's exponents are read as the eta-space
    exponents beta_j of a_j(eta) = |eta|^beta_j (d = 3 only); all the
    derivatives are then closed-form.
    """
    if eta == 0.0:
        raise SingularityError("curvature potential is singular at eta = 0")
    betas = model.exponents
    if len(betas) == 1:
        betas = betas * 3
    if len(betas) != 3:
        raise DomainError("curvature potential needs three scale factors")
    bbar = sum(betas) / 3.0
    q_aniso = sum(
        (betas[j] - betas[k]) ** 2 for j in range(3) for k in range(j + 1, 3)
    ) / 18.0
    # a^4 (a^-2 d_eta delta + delta^2 + Q) collapses to eta^-2 times a pure
    # number: the |eta|^(4 bbar) prefactor cancels against the |eta|^(-4 bbar)
    # carried by each of the three summands.
    return 6.0 * (bbar * (-1.0 - 2.0 * bbar) + bbar**2 + q_aniso) / eta**2


def mass_metric_factor(model: MetricModel, eta: float) -> float:
    """m^2 g = m^2 a^6 at eta, with a = |eta|^bbar as in curvature_potential."""
    betas = model.exponents
    bbar = sum(betas) / len(betas)
    return model.mass**2 * abs(eta) ** (6.0 * bbar)


def eta_of_t(model: MetricModel, t: float) -> float:
    """Conformal-like coordinate eta(t) for the power-law metric."""
    alpha = model.alpha
    if alpha == model.excluded_alpha:
        raise DomainError(
            f"alpha = {alpha} is the excluded value for {model.interpretation}"
        )
    k = 3.0 if model.interpretation == COSMOLOGICAL else 2.0
    if t == 0.0:
        if k * alpha > 0.0:
            raise SingularityError("eta(t) is singular at t = 0 for alpha > 0")
        return 0.0
    return t * abs(t) ** (-k * alpha) / (1.0 - k * alpha)
