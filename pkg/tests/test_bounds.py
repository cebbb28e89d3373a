"""Tests for the analytic Jensen bounds on the momentum-space kernel."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fkgreen.bounds import (
    LOWER,
    UPPER,
    b_const,
    closed_lower_scale_invariant,
    h_form,
    h_isotropic,
    lower_bound_kernel,
    upper_bound_kernel,
)
from fkgreen.errors import DivergentIntegralError, DomainError
from fkgreen.kernel import fk_kernel_momentum
from fkgreen.numerics import gamma_fn, gaussian_abs_moment
from fkgreen.potentials import (
    CompositeForm,
    IsotropicForm,
    PowerLawTerm,
    ScalarPotential,
)

FREE_FIELD = IsotropicForm(3, (PowerLawTerm(0.5, 0.0),))


def scale_invariant(two_nu, d=3, amplitude=1.0):
    return IsotropicForm(d, (PowerLawTerm(amplitude, two_nu),))


class TestConstantSaturation:
    def test_both_bounds_exact_for_constant_potential(self):
        # Jensen's inequality is an equality for constant integrands: both
        # bounds must equal the exact kernel for the free field.
        p = np.array([0.6, -0.2, 0.9])
        tau, eta, etap = 1.7, 0.4, -0.3
        exact = (2 * math.pi * tau) ** -0.5 * math.exp(
            -((etap - eta) ** 2) / (2 * tau) - tau * 0.5 * float(p @ p)
        )
        lo = lower_bound_kernel(eta, etap, tau, p, FREE_FIELD)
        hi = upper_bound_kernel(eta, etap, tau, p, FREE_FIELD)
        assert lo.value == pytest.approx(exact, rel=1e-9)
        assert hi.value == pytest.approx(exact, rel=1e-6)
        assert lo.side == LOWER and hi.side == UPPER

    def test_constant_w_saturates_too(self):
        w = ScalarPotential((PowerLawTerm(0.7, 0.0),))
        tau = 2.0
        exact = (2 * math.pi * tau) ** -0.5 * math.exp(-tau * 0.7)
        lo = lower_bound_kernel(0, 0, tau, np.zeros(3), None, w=w)
        hi = upper_bound_kernel(0, 0, tau, np.zeros(3), None, w=w)
        assert lo.value == pytest.approx(exact, rel=1e-9)
        assert hi.value == pytest.approx(exact, rel=1e-6)


class TestOrdering:
    @given(
        two_nu=st.floats(min_value=-0.6, max_value=1.5),
        tau=st.floats(min_value=0.1, max_value=5.0),
        pmag=st.floats(min_value=0.0, max_value=2.0),
        eta=st.floats(min_value=-1.5, max_value=1.5),
    )
    @settings(max_examples=15, deadline=None)
    def test_lower_below_upper(self, two_nu, tau, pmag, eta):
        form = scale_invariant(two_nu)
        p = np.array([pmag, 0.0, 0.0])
        lo = lower_bound_kernel(eta, -eta, tau, p, form, rel_tol=1e-5)
        hi = upper_bound_kernel(eta, -eta, tau, p, form, rel_tol=1e-5)
        # Slack covers the requested quadrature tolerance: near-constant
        # potentials saturate both bounds, so they agree to ~rel_tol.
        slack = (
            3 * (lo.abs_error_estimate + hi.abs_error_estimate)
            + 2e-5 * hi.value
        )
        assert lo.value <= hi.value + slack

    def test_monte_carlo_between_bounds(self):
        form = scale_invariant(-0.5)
        p = np.array([1.0, 0.0, 0.0])
        tau = 1.0
        lo = lower_bound_kernel(0, 0, tau, p, form)
        hi = upper_bound_kernel(0, 0, tau, p, form)
        mc = fk_kernel_momentum(0, 0, tau, p, form, n_paths=40_000,
                                n_steps=512, seed=7)
        assert lo.value - 1e-9 <= mc.mean + 3 * mc.std_error
        assert mc.mean - 3 * mc.std_error <= hi.value + 1e-9

    def test_w_monotonicity(self):
        form = scale_invariant(-0.5)
        w = ScalarPotential((PowerLawTerm(0.4, 1.0),))
        p = np.array([0.5, 0.0, 0.0])
        for fn in (lower_bound_kernel, upper_bound_kernel):
            bare = fn(0, 0, 1.0, p, form)
            damped = fn(0, 0, 1.0, p, form, w=w)
            assert damped.value < bare.value


class TestClosedFormAgreement:
    def test_lower_bound_matches_scale_invariant_formula(self):
        # Quadrature route vs the Beta-function closed form at the
        # singular hyperplane, across the admissible nu range.
        for two_nu in (-0.5, 0.0, 1.0):
            nu = 0.5 * two_nu
            form = scale_invariant(two_nu)
            h = h_isotropic(1.0, two_nu, 3)
            p = np.array([0.8, -0.4, 0.2])
            for tau in (0.25, 1.0, 4.0):
                lo = lower_bound_kernel(0, 0, tau, p, form, rel_tol=1e-8)
                closed = closed_lower_scale_invariant(tau, p, nu, 0.0, h, 0.0)
                assert lo.value == pytest.approx(closed.value, rel=1e-6)

    def test_closed_form_with_w(self):
        w = ScalarPotential((PowerLawTerm(0.3, -0.5),))
        form = scale_invariant(-0.5)
        b = b_const(w)
        h = h_isotropic(1.0, -0.5, 3)
        p = np.array([1.0, 0.0, 0.0])
        tau = 2.0
        lo = lower_bound_kernel(0, 0, tau, p, form, w=w, rel_tol=1e-8)
        closed = closed_lower_scale_invariant(tau, p, -0.25, -0.25, h, b)
        assert lo.value == pytest.approx(closed.value, rel=1e-6)


class TestHFormAndB:
    def test_free_field_h(self):
        np.testing.assert_allclose(h_form(FREE_FIELD), 0.5 * np.eye(3))

    def test_abs_power_examples(self):
        # E|y|^(-1) form with 2 nu = 1: sqrt(2/pi); 2 nu = -1/2:
        # 2^(-1/4) Gamma(1/4) / sqrt(pi).
        got = h_form(scale_invariant(1.0, d=2))
        np.testing.assert_allclose(got, math.sqrt(2 / math.pi) * np.eye(2),
                                   rtol=1e-8)
        got = h_form(scale_invariant(-0.5, d=2))
        want = 2 ** -0.25 * gamma_fn(0.25) / math.sqrt(math.pi)
        np.testing.assert_allclose(got, want * np.eye(2), rtol=1e-8)

    def test_h_matches_closed_form_helper(self):
        for two_nu in (-0.5, 0.3, 1.0):
            np.testing.assert_allclose(
                h_form(scale_invariant(two_nu)),
                h_isotropic(1.0, two_nu, 3),
                rtol=1e-8,
            )

    def test_b_const(self):
        assert b_const(ScalarPotential(())) == 0.0
        w = ScalarPotential((PowerLawTerm(2.0, -0.5),))
        assert b_const(w) == pytest.approx(
            2.0 * gaussian_abs_moment(-0.5), rel=1e-8
        )

    def test_divergent_exponents_rejected(self):
        with pytest.raises(DivergentIntegralError):
            h_form(scale_invariant(-1.0))
        with pytest.raises(DivergentIntegralError):
            b_const(ScalarPotential((PowerLawTerm(1.0, -1.0),)))


class TestShiftedCenters:
    def test_endpoint_on_singular_center(self):
        # eta sitting exactly on a singular center is integrable for the
        # lower bound when the exponent is > -1.
        form = IsotropicForm(2, (PowerLawTerm(1.0, -0.5, 1.0),))
        p = np.array([1.0, 0.0])
        lo = lower_bound_kernel(1.0, 1.0, 1.0, p, form)
        hi = upper_bound_kernel(1.0, 1.0, 1.0, p, form)
        assert 0 < lo.value <= hi.value + 1e-9

    def test_translation_covariance(self):
        # Shifting the center and both endpoints together leaves both
        # bounds unchanged.
        base = IsotropicForm(2, (PowerLawTerm(1.0, -0.5, 0.0),))
        moved = IsotropicForm(2, (PowerLawTerm(1.0, -0.5, 2.5),))
        p = np.array([0.7, 0.1])
        for fn, tol in ((lower_bound_kernel, 1e-8), (upper_bound_kernel, 1e-5)):
            a = fn(0.3, -0.4, 1.2, p, base)
            b = fn(0.3 + 2.5, -0.4 + 2.5, 1.2, p, moved)
            assert a.value == pytest.approx(b.value, rel=tol)


class TestValidation:
    def test_divergent_lower_bound(self):
        with pytest.raises(DivergentIntegralError):
            lower_bound_kernel(0, 0, 1.0, np.array([1.0, 0, 0]),
                               scale_invariant(-1.0))

    def test_upper_bound_tolerates_stronger_singularity(self):
        # Exponents in (-2, -1] are fine for the upper bound (the
        # exponential tames the singularity) but not the lower one.
        form = scale_invariant(-1.2)
        hi = upper_bound_kernel(0, 0, 1.0, np.array([1.0, 0, 0]), form)
        assert hi.value > 0
        with pytest.raises(DivergentIntegralError):
            lower_bound_kernel(0, 0, 1.0, np.array([1.0, 0, 0]), form)

    def test_composite_rejected(self):
        comp = CompositeForm(scale_invariant(-0.5), f=lambda e: 1.0,
                             f_lower=0.5, f_upper=1.5)
        with pytest.raises(DomainError):
            lower_bound_kernel(0, 0, 1.0, np.array([1.0, 0, 0]), comp)

    def test_closed_form_validation(self):
        with pytest.raises(DivergentIntegralError):
            closed_lower_scale_invariant(1.0, np.ones(3), -0.5, 0.0,
                                         np.eye(3), 0.0)
        with pytest.raises(DomainError):
            closed_lower_scale_invariant(0.0, np.ones(3), 0.0, 0.0,
                                         np.eye(3), 0.0)
