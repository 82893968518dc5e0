"""Special functions and integrals against independent oracles.

Expected values are frozen from power-series / adaptive-quadrature oracles
defined here, never from the implementation under test.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from modesim import (
    DegeneratePoleError,
    NumericsError,
    QuadratureSpec,
    RngStream,
    bessel_j0,
    beta_fn,
    expint_en,
    gamma_upper_negint,
    integral_i1,
    integral_i2,
    integral_i3,
    quad_integrate,
    sample_beta_1_n,
    sample_complex_gaussian_vec,
    sample_gamma,
    scaled_expint,
)


def j0_series(x):
    # sum_k (-1)^k (x/2)^(2k) / (k!)^2
    s, term, k = 1.0, 1.0, 0
    while True:
        k += 1
        term *= -((x / 2.0) ** 2) / k**2
        s += term
        if abs(term) < 1e-18 * max(abs(s), 1e-3):
            return s


def quad_oracle(fn, lo, hi):
    val, _ = integrate.quad(fn, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=500)
    return val


E1_AT_1 = 0.21938393439552023  # quadrature of exp(-t)/t over [1, inf)


class TestBesselJ0:
    def test_at_zero(self):
        assert bessel_j0(0.0) == 1.0

    def test_series_value(self):
        assert bessel_j0(0.2513) == pytest.approx(0.9842742829188506, abs=1e-5)

    def test_first_zero(self):
        # zero located by bisection on the series oracle
        assert bessel_j0(2.404825557695773) == pytest.approx(0.0, abs=1e-5)

    @pytest.mark.parametrize("x", np.linspace(-8.0, 8.0, 33))
    def test_matches_series_oracle(self, x):
        assert bessel_j0(x) == pytest.approx(j0_series(x), rel=1e-10, abs=1e-12)

    def test_bounded(self):
        xs = np.linspace(-50, 50, 501)
        assert all(abs(bessel_j0(x)) <= 1.0 + 1e-15 for x in xs)

    @pytest.mark.parametrize("x", [math.inf, -math.inf, math.nan])
    def test_rejects_non_finite(self, x):
        with pytest.raises(ValueError):
            bessel_j0(x)


class TestExpintEn:
    def test_e1_at_1(self):
        assert expint_en(1, 1.0) == pytest.approx(E1_AT_1, abs=1e-6)

    def test_e2_from_recurrence_oracle(self):
        # E2(1) = e^-1 - 1*E1(1) with the quadrature value of E1
        assert expint_en(2, 1.0) == pytest.approx(math.exp(-1) - E1_AT_1, abs=1e-6)

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_small_x_limit(self, n):
        assert expint_en(n, 1e-12) == pytest.approx(1.0 / (n - 1), rel=1e-6)

    @pytest.mark.parametrize("n", range(1, 9))
    @pytest.mark.parametrize("x", [0.1, 1.0, 10.0])
    def test_recurrence(self, n, x):
        en = expint_en(n, x)
        resid = abs(n * expint_en(n + 1, x) - (math.exp(-x) - x * en))
        assert resid <= 1e-10 * en

    @pytest.mark.parametrize("n", [1, 3])
    @pytest.mark.parametrize("x", [0.05, 0.7, 2.5, 30.0])
    def test_matches_quadrature(self, n, x):
        oracle = quad_oracle(lambda t: math.exp(-x * t) * t ** (-n), 1.0, np.inf)
        assert expint_en(n, x) == pytest.approx(oracle, rel=1e-9)

    def test_bracket(self):
        for x in (0.2, 1.0, 5.0):
            assert 0.0 < expint_en(1, x) <= math.exp(-x) / x

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            expint_en(1, 0.0)
        with pytest.raises(ValueError):
            expint_en(1, -2.0)
        with pytest.raises(ValueError):
            expint_en(0, 1.0)


class TestScaledExpint:
    def test_at_1(self):
        assert scaled_expint(1, 1.0) == pytest.approx(0.596347362323194, abs=1e-6)

    def test_large_argument_asymptote(self):
        # e^x E1(x) ~ 1/(x+1) for large x
        assert scaled_expint(1, 1e4) == pytest.approx(1.0 / 10001.0, rel=1e-6)

    def test_no_overflow_at_huge_x(self):
        val = scaled_expint(1, 1e6)
        assert 0.0 < val < 1e-5 and math.isfinite(val)
        assert scaled_expint(5, 1e6) > 0.0

    def test_consistent_with_plain(self):
        x = 2.0
        assert scaled_expint(3, x) * math.exp(-x) == pytest.approx(
            expint_en(3, x), rel=1e-12)


class TestGammaUpperNegint:
    def test_order_zero_is_e1(self):
        assert gamma_upper_negint(0, 1.0) == pytest.approx(E1_AT_1, abs=1e-6)

    def test_order_minus_one(self):
        assert gamma_upper_negint(1, 1.0) == pytest.approx(
            math.exp(-1) - E1_AT_1, abs=1e-6)

    def test_order_minus_two_vs_quadrature(self):
        oracle = quad_oracle(lambda t: t**-3 * math.exp(-t), 0.5, np.inf)
        assert gamma_upper_negint(2, 0.5) == pytest.approx(oracle, abs=1e-8)

    def test_domain(self):
        with pytest.raises(ValueError):
            gamma_upper_negint(1, 0.0)
        with pytest.raises(ValueError):
            gamma_upper_negint(-1, 1.0)


class TestBetaFn:
    def test_small_integers(self):
        assert beta_fn(2, 2) == pytest.approx(1.0 / 6.0, rel=1e-14)

    @pytest.mark.parametrize("n", [1, 2, 7, 100])
    def test_first_arg_one(self, n):
        assert beta_fn(1, n) == pytest.approx(1.0 / n, rel=1e-13)

    def test_huge_first_argument(self):
        # high-precision oracle value (mpmath, 40 digits)
        assert beta_fn(2**20, 4.0 / 3.0) == pytest.approx(
            8.382524887582018e-09, rel=1e-10)

    def test_domain(self):
        with pytest.raises(ValueError):
            beta_fn(0.0, 1.0)
        with pytest.raises(ValueError):
            beta_fn(1.0, -1.0)


GRID = [(a, b, m) for a in (0.1, 1.0, 10.0) for b in (0.3, 2.0, 5.0) for m in (1, 2, 3)]


class TestRateIntegrals:
    def test_i1_m0_is_scaled_e1(self):
        assert integral_i1(1.0, 1.0, 0) == pytest.approx(0.596347362323194, abs=1e-6)

    def test_i1_m1(self):
        assert integral_i1(1.0, 1.0, 1) == pytest.approx(0.40365263767680604, abs=1e-6)

    def test_i1_vs_quadrature(self):
        oracle = quad_oracle(lambda x: x**3 * math.exp(-0.5 * x) / (x + 2.0), 0, np.inf)
        assert integral_i1(0.5, 2.0, 3) == pytest.approx(oracle, rel=1e-7)

    def test_i2_m1(self):
        assert integral_i2(1.0, 1.0, 1) == pytest.approx(0.596347362323194, abs=1e-6)

    def test_i2_m2(self):
        assert integral_i2(1.0, 1.0, 2) == pytest.approx(0.40365263767680604, abs=1e-6)

    def test_i2_vs_quadrature(self):
        oracle = quad_oracle(lambda x: math.exp(-2.0 * x) / (x + 3.0) ** 4, 0, np.inf)
        assert integral_i2(2.0, 3.0, 4) == pytest.approx(oracle, rel=1e-7)

    @pytest.mark.parametrize("a,b,m", [(1.0, 2.0, 1), (1.0, 0.5, 3)])
    def test_i3_vs_quadrature(self, a, b, m):
        oracle = quad_oracle(
            lambda x: math.exp(-a * x) / ((x + b) ** m * (x + 1.0)), 0, np.inf)
        assert integral_i3(a, b, m) == pytest.approx(oracle, rel=1e-7)

    def test_i3_pole_rejected_and_merged_form(self):
        with pytest.raises(DegeneratePoleError):
            integral_i3(1.0, 1.0 + 1e-12, 2)
        # merged pole: 1/((x+1)^m (x+1)) = 1/(x+1)^(m+1)
        oracle = quad_oracle(lambda x: math.exp(-x) / (x + 1.0) ** 3, 0, np.inf)
        assert integral_i2(1.0, 1.0, 3) == pytest.approx(oracle, rel=1e-7)

    @pytest.mark.parametrize("a,b,m", GRID)
    def test_closed_forms_match_quadrature_grid(self, a, b, m):
        q1 = quad_oracle(lambda x: x**m * math.exp(-a * x) / (x + b), 0, np.inf)
        q2 = quad_oracle(lambda x: math.exp(-a * x) / (x + b) ** m, 0, np.inf)
        q3 = quad_oracle(lambda x: math.exp(-a * x) / ((x + b) ** m * (x + 1.0)), 0, np.inf)
        assert integral_i1(a, b, m) == pytest.approx(q1, rel=1e-6)
        assert integral_i2(a, b, m) == pytest.approx(q2, rel=1e-6)
        assert integral_i3(a, b, m) == pytest.approx(q3, rel=1e-6)

    def test_domain_errors(self):
        for fn in (integral_i1, integral_i2, integral_i3):
            with pytest.raises(ValueError):
                fn(-1.0, 1.0, 1)
            with pytest.raises(ValueError):
                fn(1.0, 0.0, 1)


class TestQuadIntegrate:
    def test_basic(self):
        assert quad_integrate(lambda x: x * x, 0.0, 1.0) == pytest.approx(1.0 / 3.0, rel=1e-10)

    def test_infinite_interval(self):
        assert quad_integrate(lambda x: math.exp(-x), 0.0, np.inf) == pytest.approx(1.0, rel=1e-9)

    def test_reports_failure(self):
        # integrand far too rough for the subdivision budget
        spec = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-13, max_subdivisions=1)
        with pytest.raises(NumericsError):
            quad_integrate(lambda x: math.sin(1.0 / (x + 1e-12)), 0.0, 1.0, spec)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            QuadratureSpec(abs_tol=0.0)
        with pytest.raises(ValueError):
            QuadratureSpec(max_subdivisions=0)


class TestSamplers:
    def test_complex_gaussian_moments(self):
        gen = RngStream(123, 0).generator()
        draws = sample_complex_gaussian_vec(4, 1.0, gen, count=100_000)
        sigma = math.sqrt(0.5 / 100_000)
        assert abs(draws.real.mean()) < 3 * sigma
        assert abs(draws.imag.mean()) < 3 * sigma
        norms_sq = (np.abs(draws) ** 2).sum(axis=1)
        assert norms_sq.mean() == pytest.approx(4.0, abs=0.05)

    def test_stream_determinism(self):
        a = sample_complex_gaussian_vec(3, 1.0, RngStream(7, 9).generator(), count=100)
        b = sample_complex_gaussian_vec(3, 1.0, RngStream(7, 9).generator(), count=100)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = sample_complex_gaussian_vec(3, 1.0, RngStream(7, 0).generator(), count=100)
        b = sample_complex_gaussian_vec(3, 1.0, RngStream(7, 1).generator(), count=100)
        assert not np.allclose(a, b)

    def test_gamma_moments(self):
        gen = RngStream(5, 0).generator()
        draws = sample_gamma(3.0, 0.1, gen, count=100_000)
        assert draws.mean() == pytest.approx(0.3, abs=0.01)
        assert draws.var() == pytest.approx(0.03, abs=0.005)

    def test_beta_1_1_is_uniform(self):
        gen = RngStream(5, 1).generator()
        draws = sample_beta_1_n(1, gen, count=100_000)
        assert draws.mean() == pytest.approx(0.5, abs=0.01)
        assert draws.min() >= 0.0 and draws.max() <= 1.0

    def test_beta_1_n_mean(self):
        gen = RngStream(5, 2).generator()
        draws = sample_beta_1_n(3, gen, count=100_000)
        assert draws.mean() == pytest.approx(0.25, abs=0.01)

    def test_beta_1_0_point_mass(self):
        gen = RngStream(5, 3).generator()
        assert sample_beta_1_n(0, gen) == 1.0
        assert np.all(sample_beta_1_n(0, gen, count=10) == 1.0)

    def test_validation(self):
        gen = RngStream(0, 0).generator()
        with pytest.raises(ValueError):
            sample_complex_gaussian_vec(0, 1.0, gen)
        with pytest.raises(ValueError):
            sample_gamma(-1.0, 1.0, gen)
        with pytest.raises(ValueError):
            sample_beta_1_n(-1, gen)
