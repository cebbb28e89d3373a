"""Tests of the Feynman-Kac Monte Carlo kernel and moment estimators."""

import math

import numpy as np
import pytest

from fkgreen.errors import DomainError
from fkgreen.kernel import (
    FIXED_ENDPOINT,
    INTEGRATED_ENDPOINT,
    fk_kernel_momentum,
    fk_kernel_position,
    second_moment,
)
from fkgreen.potentials import (
    CompositeForm,
    DiagonalForm,
    IsotropicForm,
    PowerLawTerm,
    ScalarPotential,
)

SEED = 314159

FREE_FIELD = IsotropicForm(3, (PowerLawTerm(0.5, 0.0),))
SINGULAR = IsotropicForm(3, (PowerLawTerm(1.0, -0.5),))


def free_heat(tau, delta):
    return (2 * math.pi * tau) ** -0.5 * math.exp(-(delta**2) / (2 * tau))


class TestMomentumKernel:
    def test_free_field_exact(self):
        # Constant potential: every path carries the same weight, so the
        # estimate is exact with zero variance at any n_paths.
        p = np.array([0.7, -0.3, 1.1])
        est = fk_kernel_momentum(
            0.4, -0.9, 2.0, p, FREE_FIELD, n_paths=50, n_steps=16, seed=SEED
        )
        want = free_heat(2.0, -1.3) * math.exp(-2.0 * 0.5 * float(p @ p))
        assert est.mean == pytest.approx(want, rel=1e-12)
        assert est.std_error <= 1e-8 * est.mean  # roundoff only

    def test_zero_momentum_free(self):
        est = fk_kernel_momentum(
            0.0, 0.0, 1.5, np.zeros(3), FREE_FIELD, n_paths=10, n_steps=4,
            seed=SEED,
        )
        assert est.mean == pytest.approx(free_heat(1.5, 0.0), rel=1e-12)

    def test_reproducible_and_stream_offset(self):
        args = (0.0, 0.0, 1.0, np.array([1.0, 0, 0]), SINGULAR)
        kw = dict(n_paths=2_000, n_steps=64, seed=SEED)
        a = fk_kernel_momentum(*args, **kw)
        b = fk_kernel_momentum(*args, **kw)
        assert a.mean == b.mean and a.std_error == b.std_error
        c = fk_kernel_momentum(*args, **kw, stream_offset=7)
        assert c.mean != a.mean

    def test_thread_count_invariance(self):
        args = (0.1, -0.2, 1.0, np.array([1.0, 0, 0]), SINGULAR)
        kw = dict(n_paths=4_000, n_steps=32, seed=SEED, chunk_size=1_000)
        one = fk_kernel_momentum(*args, **kw, n_threads=1)
        four = fk_kernel_momentum(*args, **kw, n_threads=4)
        assert one.mean == four.mean
        assert one.std_error == four.std_error

    def test_step_doubling_within_noise(self):
        # Matched-randomness refinement: at modest n_paths the statistical
        # error dominates the discretization bias, so doubling n_steps moves
        # the estimate by less than a couple of standard errors.
        args = (0.0, 0.0, 1.0, np.array([1.0, 0, 0]), SINGULAR)
        coarse = fk_kernel_momentum(*args, n_paths=4_000, n_steps=256, seed=SEED)
        fine = fk_kernel_momentum(*args, n_paths=4_000, n_steps=512, seed=SEED)
        assert abs(coarse.mean - fine.mean) < 2 * max(
            coarse.std_error, fine.std_error
        ) + 1e-3 * coarse.mean

    def test_w_monotonic_matched_seeds(self):
        # Adding a nonnegative W decreases every path weight, hence the mean.
        args = (0.0, 0.0, 1.0, np.array([1.0, 0, 0]), SINGULAR)
        kw = dict(n_paths=1_000, n_steps=64, seed=SEED)
        bare = fk_kernel_momentum(*args, **kw)
        damped = fk_kernel_momentum(
            *args, w=ScalarPotential((PowerLawTerm(0.5, 1.0),)), **kw
        )
        assert damped.mean < bare.mean

    def test_antithetic_reproducible(self):
        args = (0.0, 0.0, 1.0, np.array([1.0, 0, 0]), SINGULAR)
        kw = dict(n_paths=1_000, n_steps=64, seed=SEED, antithetic=True)
        a = fk_kernel_momentum(*args, **kw)
        b = fk_kernel_momentum(*args, **kw)
        assert a.mean == b.mean
        assert a.n_paths == 2_000  # each draw contributes both signs

    def test_composite_sandwiched_by_bracket(self):
        # V for the composite lies between the pure power-law brackets, so
        # the matched-seed kernel estimates are ordered the other way.
        base = IsotropicForm(2, (PowerLawTerm(1.0, -0.5),))
        comp = CompositeForm(
            base, f=lambda e: 1.5 + 0.4 * math.sin(e), f_lower=1.1, f_upper=1.9
        )
        low_form, _, up_form, l_up = comp.bracketing()
        p = np.array([0.8, 0.1])
        kw = dict(n_paths=2_000, n_steps=64, seed=SEED)
        mid = fk_kernel_momentum(0.2, 0.5, 1.0, p, comp, **kw)
        low = fk_kernel_momentum(0.2, 0.5, 1.0, p, low_form, **kw)
        hi = fk_kernel_momentum(0.2, 0.5, 1.0, p, up_form, **kw)
        assert hi.mean <= mid.mean <= low.mean

    def test_dirichlet_reduces_kernel(self):
        args = (0.8, 0.6, 1.0, np.array([0.5, 0, 0]), SINGULAR)
        kw = dict(n_paths=2_000, n_steps=64, seed=SEED)
        free = fk_kernel_momentum(*args, **kw)
        absorbed = fk_kernel_momentum(*args, dirichlet=True, **kw)
        assert absorbed.mean < free.mean

    def test_dirichlet_needs_positive_endpoints(self):
        with pytest.raises(DomainError):
            fk_kernel_momentum(
                0.0, 1.0, 1.0, np.zeros(3), SINGULAR, dirichlet=True,
                n_paths=10, n_steps=4, seed=SEED,
            )

    def test_nonintegrable_exponent_rejected(self):
        bad = IsotropicForm(3, (PowerLawTerm(1.0, -1.5),))
        with pytest.raises(DomainError):
            fk_kernel_momentum(
                0.0, 0.0, 1.0, np.array([1.0, 0, 0]), bad,
                n_paths=10, n_steps=4, seed=SEED,
            )

    def test_tau_positive(self):
        with pytest.raises(DomainError):
            fk_kernel_momentum(
                0, 0, 0.0, np.zeros(3), FREE_FIELD, n_paths=10, n_steps=4,
                seed=SEED,
            )


class TestPositionKernel:
    def test_free_field_heat_product(self):
        # Vt = I/2 makes the full (d+1)-dimensional operator the free
        # Laplacian: the kernel is a product of heat kernels, exactly.
        tau = 1.7
        x = np.array([0.3, -0.2, 0.5])
        xp = np.array([-0.1, 0.4, 0.0])
        est = fk_kernel_position(
            0.2, x, -0.6, xp, tau, FREE_FIELD, n_paths=40, n_steps=8, seed=SEED
        )
        want = free_heat(tau, -0.8)
        for dxi in xp - x:
            want *= free_heat(tau, dxi)
        assert est.mean == pytest.approx(want, rel=1e-12)
        assert est.std_error == 0.0
        assert est.rejected == 0

    def test_diagonal_free_field(self):
        form = DiagonalForm((PowerLawTerm(0.5, 0.0), PowerLawTerm(0.5, 0.0)))
        tau = 0.9
        est = fk_kernel_position(
            0.0, np.zeros(2), 0.0, np.array([1.0, -1.0]), tau, form,
            n_paths=20, n_steps=8, seed=SEED,
        )
        want = free_heat(tau, 0.0) * free_heat(tau, 1.0) * free_heat(tau, -1.0)
        assert est.mean == pytest.approx(want, rel=1e-12)

    def test_matches_momentum_route_free_field(self):
        # Fourier consistency at a point: position kernel vs the explicit
        # Gaussian integral of the momentum kernel (free field, closed form
        # on both sides, so this checks the normalization conventions).
        tau, d = 1.0, 3
        est = fk_kernel_position(
            0.0, np.zeros(d), 0.0, np.zeros(d), tau, FREE_FIELD,
            n_paths=10, n_steps=4, seed=SEED,
        )
        want = free_heat(tau, 0.0) ** (d + 1)
        assert est.mean == pytest.approx(want, rel=1e-12)

    def test_reproducible(self):
        x = np.zeros(3)
        xp = np.array([0.5, 0.0, 0.0])
        kw = dict(n_paths=500, n_steps=32, seed=SEED)
        a = fk_kernel_position(0.0, x, 0.0, xp, 1.0, SINGULAR, **kw)
        b = fk_kernel_position(0.0, x, 0.0, xp, 1.0, SINGULAR, **kw)
        assert a.mean == b.mean

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            fk_kernel_position(
                0.0, np.zeros(2), 0.0, np.zeros(3), 1.0, FREE_FIELD,
                n_paths=10, n_steps=4, seed=SEED,
            )


class TestSecondMoment:
    def test_constant_trace_exact(self):
        # trace Vt = 3/2 everywhere: integrated mode gives tau * trace with
        # zero variance; fixed mode carries the kernel prefactor.
        tau = 0.8
        integ = second_moment(
            tau, FREE_FIELD, mode=INTEGRATED_ENDPOINT, n_paths=40, n_steps=8,
            seed=SEED,
        )
        assert integ.value == pytest.approx(tau * 1.5, rel=1e-12)
        assert integ.std_error == 0.0
        fixed = second_moment(
            tau, FREE_FIELD, mode=FIXED_ENDPOINT, n_paths=40, n_steps=8,
            seed=SEED,
        )
        want = (2 * math.pi * tau) ** -0.5 * tau * 1.5
        assert fixed.value == pytest.approx(want, rel=1e-12)

    def test_scaling_power_small_sample(self):
        # For the scale-invariant form with nu = -1/4 the integrated moment
        # scales as tau^(1+nu); check the ratio between two tau values.
        kw = dict(n_paths=60_000, n_steps=256, seed=SEED)
        m1 = second_moment(1.0, SINGULAR, mode=INTEGRATED_ENDPOINT, **kw)
        m2 = second_moment(4.0, SINGULAR, mode=INTEGRATED_ENDPOINT, **kw)
        ratio = m2.value / m1.value
        want = 4.0 ** (1 - 0.25)
        se = ratio * (
            m1.std_error / m1.value + m2.std_error / m2.value
        )
        assert ratio == pytest.approx(want, abs=4 * se + 0.02 * want)

    def test_w_damps_moment(self):
        kw = dict(n_paths=2_000, n_steps=64, seed=SEED)
        bare = second_moment(1.0, SINGULAR, mode=INTEGRATED_ENDPOINT, **kw)
        damped = second_moment(
            1.0, SINGULAR, w=ScalarPotential((PowerLawTerm(1.0, 2.0),)),
            mode=INTEGRATED_ENDPOINT, **kw,
        )
        assert damped.value < bare.value

    def test_unknown_mode(self):
        with pytest.raises(DomainError):
            second_moment(1.0, FREE_FIELD, mode="sideways", n_paths=10,
                          n_steps=4, seed=SEED)

    def test_nonintegrable_rejected(self):
        bad = IsotropicForm(2, (PowerLawTerm(1.0, -1.2),))
        with pytest.raises(DomainError):
            second_moment(1.0, bad, n_paths=10, n_steps=4, seed=SEED)
