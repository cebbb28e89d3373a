"""Tests of the Green's function tau-integrals, fits and sandwich checks."""

import math

import numpy as np
import pytest

from fkgreen.bounds import b_const, h_isotropic
from fkgreen.errors import DivergentIntegralError, DomainError
from fkgreen.green import (
    LOWER,
    MC,
    UPPER,
    ShiftReport,
    fit_scaling_exponent,
    green_momentum,
    lower_bound_green_constant,
    omega,
    sandwich_check,
    shifted_center_equivalence,
    zero_momentum_finiteness,
)
from fkgreen.numerics import beta_weight_integral, gamma_fn
from fkgreen.potentials import IsotropicForm, PowerLawTerm, ScalarPotential

FREE_FIELD = IsotropicForm(3, (PowerLawTerm(0.5, 0.0),))
SINGULAR = IsotropicForm(3, (PowerLawTerm(1.0, -0.5),))


class TestOmegaAndConstants:
    def test_omega_values(self):
        assert omega(0.0) == pytest.approx(0.5)
        assert omega(-0.25) == pytest.approx(2.0 / 3.0)
        assert omega(0.5) == pytest.approx(1.0 / 3.0)

    def test_omega_domain(self):
        with pytest.raises(DomainError):
            omega(-1.0)

    def test_lower_bound_constant(self):
        # K1 = (2 pi)^(-1/2) Gamma(omega) / (1 + nu); at nu = 0 this is
        # (2 pi)^(-1/2) Gamma(1/2) = 1 / sqrt(2).
        assert lower_bound_green_constant(0.0) == pytest.approx(
            1.0 / math.sqrt(2.0), rel=1e-12
        )
        nu = -0.25
        want = (2 * math.pi) ** -0.5 * gamma_fn(omega(nu)) / (1 + nu)
        assert lower_bound_green_constant(nu) == pytest.approx(want)
        with pytest.raises(DomainError):
            lower_bound_green_constant(-0.5)


class TestConstantPotentialClosedForms:
    def test_free_field_green(self):
        # V + W = A p^2 + B constant: G = (2 (A p^2 + B))^(-1/2) on the
        # diagonal.  All three deterministic routes must agree.
        p = np.array([1.3, 0.0, 0.0])
        want = (2 * (0.5 * 1.3**2)) ** -0.5
        for method in (LOWER, UPPER):
            g = green_momentum(0.0, 0.0, p, FREE_FIELD, method=method)
            assert g.value == pytest.approx(want, rel=1e-5)

    def test_constant_w_zero_momentum(self):
        c = 0.8
        w = ScalarPotential((PowerLawTerm(c, 0.0),))
        g = zero_momentum_finiteness(w)
        assert g.value == pytest.approx((2 * c) ** -0.5, rel=1e-5)

    def test_off_diagonal_free_field(self):
        # G(eta, eta') = (2 v p^2)^(-1/2) exp(-sqrt(2 v) |p| |eta - eta'|)
        # for Vt = v I; here v = 1/2 gives |p|^(-1) exp(-|p| |d eta|).
        p = np.array([0.9, 0.0, 0.0])
        deta = 1.4
        want = (1 / 0.9) * math.exp(-0.9 * deta)
        for method in (LOWER, UPPER):
            g = green_momentum(0.0, deta, p, FREE_FIELD, method=method)
            assert g.value == pytest.approx(want, rel=1e-4)


class TestAnomalousLowerBound:
    def test_matches_k1_closed_form(self):
        # For the scale-invariant form the lower-bound Green's function is
        # exactly K1 ((p.h.p) Beta(nu))^(-omega).
        for two_nu, amp in ((-0.5, 1.0), (0.0, 0.5), (1.0, 2.0)):
            nu = 0.5 * two_nu
            form = IsotropicForm(3, (PowerLawTerm(amp, two_nu),))
            h = h_isotropic(amp, two_nu, 3)
            for pmag in (0.3, 1.0, 3.0):
                p = np.array([pmag, 0.0, 0.0])
                php = float(p @ h @ p)
                want = lower_bound_green_constant(nu) * (
                    php * beta_weight_integral(nu)
                ) ** -omega(nu)
                g = green_momentum(0.0, 0.0, p, form, method=LOWER)
                assert g.value == pytest.approx(want, rel=1e-7)

    def test_route_equivalence_lower(self):
        # Closed-form smoothing vs direct tau-quadrature of the bound kernel.
        p = np.array([1.0, 0.0, 0.0])
        fast = green_momentum(0.0, 0.0, p, SINGULAR, method=LOWER)
        slow = green_momentum(0.0, 0.0, p, SINGULAR, method=LOWER,
                              tau_quadrature=True, rel_tol=1e-5)
        assert fast.value == pytest.approx(slow.value, rel=1e-4)

    def test_route_equivalence_upper(self):
        # Bessel collapse of the tau-integral vs direct tau-quadrature.
        p = np.array([1.0, 0.0, 0.0])
        fast = green_momentum(0.0, 0.0, p, SINGULAR, method=UPPER,
                              rel_tol=1e-6)
        slow = green_momentum(0.0, 0.0, p, SINGULAR, method=UPPER,
                              tau_quadrature=True, rel_tol=1e-4)
        assert fast.value == pytest.approx(slow.value, rel=2e-4)

    def test_momentum_scaling_exponents(self):
        # Both bounds scale as |p|^(-2 omega) for the scale-invariant form.
        nu = -0.25
        ps = np.logspace(0, 1, 6)
        for method, tol in ((LOWER, 1e-6), (UPPER, 1e-3)):
            samples = []
            for pmag in ps:
                g = green_momentum(
                    0.0, 0.0, np.array([pmag, 0, 0]), SINGULAR,
                    method=method, rel_tol=1e-5,
                )
                samples.append((pmag, g.value, 0.0))
            fit = fit_scaling_exponent(samples)
            assert fit.exponent == pytest.approx(-2 * omega(nu), rel=tol)


class TestFitScalingExponent:
    def test_exact_power_law(self):
        xs = np.logspace(-1, 1, 8)
        samples = [(x, 3.0 * x**-1.5, 0.0) for x in xs]
        fit = fit_scaling_exponent(samples)
        assert fit.exponent == pytest.approx(-1.5, rel=1e-12)
        assert fit.amplitude == pytest.approx(3.0, rel=1e-10)
        assert fit.residual_rms < 1e-12
        assert fit.n_points == 8

    def test_weighted_fit_downweights_noisy_point(self):
        xs = np.logspace(0, 1, 6)
        samples = [(x, x**2.0, 1e-6 * x**2) for x in xs]
        # Corrupt one point but give it a huge error bar.
        x0 = xs[2]
        samples[2] = (x0, 2.0 * x0**2.0, 10.0 * x0**2)
        fit = fit_scaling_exponent(samples)
        assert fit.exponent == pytest.approx(2.0, abs=1e-3)

    def test_validation(self):
        with pytest.raises(DomainError):
            fit_scaling_exponent([(1.0, 1.0, 0.0), (2.0, 2.0, 0.0)])
        with pytest.raises(DomainError):
            fit_scaling_exponent([(1.0, -1.0, 0.0)] * 3)
        with pytest.raises(DomainError):
            fit_scaling_exponent([(1.0, 1.0, 0.0), (1.0, 2.0, 0.0),
                                  (2.0, 3.0, 0.0)])


class TestSandwich:
    def test_single_point_sandwich(self):
        pts = sandwich_check(
            [np.array([1.0, 0.0, 0.0])], SINGULAR,
            n_paths=8_000, n_steps=256, seed=42,
        )
        assert len(pts) == 1
        pt = pts[0]
        assert pt.ok
        assert pt.lower.value <= pt.upper.value
        assert pt.lower.method == LOWER and pt.upper.method == UPPER
        assert pt.mc.method == MC

    def test_momentum_threshold(self):
        with pytest.raises(DomainError):
            sandwich_check(
                [np.array([1e-4, 0.0, 0.0])], SINGULAR, min_abs_p=0.1,
                n_paths=100, n_steps=16,
            )


class TestZeroMomentum:
    def test_w_zero_diverges(self):
        with pytest.raises(DivergentIntegralError):
            zero_momentum_finiteness(ScalarPotential(()))
        with pytest.raises(DivergentIntegralError):
            green_momentum(0.0, 0.0, np.zeros(3), SINGULAR, method=LOWER)

    def test_sigma_out_of_range(self):
        w = ScalarPotential((PowerLawTerm(1.0, -1.0),))
        with pytest.raises(DivergentIntegralError):
            zero_momentum_finiteness(w)

    def test_singular_w_finite(self):
        w = ScalarPotential((PowerLawTerm(1.0, -0.5),))
        g = zero_momentum_finiteness(w)
        assert 0 < g.value < math.inf
        assert g.error < 1e-3 * g.value


class TestShiftedCenter:
    def test_bound_methods_exact(self):
        for method in (LOWER, UPPER):
            rep = shifted_center_equivalence(-0.25, 1.7, method=method)
            assert isinstance(rep, ShiftReport)
            assert rep.max_rel_deviation < 1e-6

    def test_mc_within_noise(self):
        rep = shifted_center_equivalence(-0.25, 1.7, method=MC, n_paths=4_000)
        assert rep.max_rel_deviation < 0.05
