import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volput.exceptions import SpecialFunctionDomainError
from volput.specfn import (
    kummer_m,
    kummer_m_dz,
    kummer_m_log,
    kummer_m_quadrature,
    log_gamma,
)

mp.mp.dps = 40


def ref_m(a, b, z):
    return float(mp.hyp1f1(a, b, z))


def rel(x, y):
    return abs(x - y) / abs(y)


class TestKummerExamples:
    def test_zero_argument(self):
        assert kummer_m(0.7, 1.3, 0.0) == 1.0

    def test_equal_parameters(self):
        assert kummer_m(1.5, 1.5, 1.0) == pytest.approx(math.e, rel=1e-14)

    def test_one_two(self):
        assert kummer_m(1.0, 2.0, 1.0) == pytest.approx(math.e - 1.0, rel=1e-14)

    def test_against_quadrature(self):
        assert kummer_m(0.25, 1.6, 5.0) == pytest.approx(kummer_m_quadrature(0.25, 1.6, 5.0), rel=1e-9)

    @pytest.mark.parametrize("a,b,z", [(0.25, 1.6, 5.0), (2.3, 0.7, -12.0), (-1.7, -0.4, 3.0),
                                       (0.05, 3.6, 25.0), (50.0, 3.6, 8.0), (-2.6, -1.6, 0.008)])
    def test_against_mpmath(self, a, b, z):
        assert kummer_m(a, b, z) == pytest.approx(ref_m(a, b, z), rel=1e-12)

    @pytest.mark.parametrize("a,b,z", [(0.5, 3.6, 80.0), (50.0, 3.6, 400.0), (-0.6, -1.6, 100.0),
                                       (1.3, 2.5, 700.0)])
    def test_large_argument(self, a, b, z):
        sign, lm = kummer_m_log(a, b, z)
        ref = mp.hyp1f1(a, b, z)
        assert sign == (1 if ref > 0 else -1)
        assert lm == pytest.approx(float(mp.log(abs(ref))), rel=1e-8, abs=1e-8)

    def test_polynomial_case(self):
        # a a non-positive integer truncates the series
        assert kummer_m(-2.0, 1.5, 3.0) == pytest.approx(ref_m(-2, 1.5, 3), rel=1e-13)


class TestKummerLog:
    def test_exponential(self):
        assert kummer_m_log(1.5, 1.5, 100.0) == (1, pytest.approx(100.0, rel=1e-12))

    def test_zero_argument(self):
        assert kummer_m_log(0.7, 1.3, 0.0) == (1, 0.0)

    def test_closed_form(self):
        sign, lm = kummer_m_log(1.0, 2.0, 50.0)
        assert sign == 1
        assert lm == pytest.approx(math.log(math.expm1(50.0) / 50.0), rel=1e-12)

    def test_overflow_raises_but_log_works(self):
        with pytest.raises(OverflowError):
            kummer_m(1.0, 2.0, 800.0)
        sign, lm = kummer_m_log(1.0, 2.0, 800.0)
        assert sign == 1
        assert lm == pytest.approx(800.0 - math.log(800.0), rel=1e-12)

    @given(a=st.floats(0.01, 5), b=st.floats(0.1, 6), z=st.floats(-30, 30))
    @settings(max_examples=200, deadline=None)
    def test_consistent_with_direct(self, a, b, z):
        sign, lm = kummer_m_log(a, b, z)
        m = kummer_m(a, b, z)
        assert sign * math.exp(lm) == pytest.approx(m, rel=1e-10)


class TestDerivative:
    def test_exponential(self):
        assert kummer_m_dz(1.5, 1.5, 1.0) == pytest.approx(math.e, rel=1e-14)

    def test_at_zero(self):
        assert kummer_m_dz(0.7, 1.3, 0.0) == pytest.approx(0.7 / 1.3, rel=1e-15)

    def test_finite_difference(self):
        h = 1e-6
        fd = (kummer_m(0.25, 1.6, 2.0 + h) - kummer_m(0.25, 1.6, 2.0 - h)) / (2 * h)
        assert kummer_m_dz(0.25, 1.6, 2.0) == pytest.approx(fd, rel=1e-6)

    def test_random_finite_difference(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            a, b, z = rng.uniform(0.01, 3), rng.uniform(0.1, 4), rng.uniform(-10, 10)
            h = 1e-6 * max(1.0, abs(z))
            fd = (kummer_m(a, b, z + h) - kummer_m(a, b, z - h)) / (2 * h)
            assert kummer_m_dz(a, b, z) == pytest.approx(fd, rel=1e-6)


class TestQuadrature:
    def test_closed_form(self):
        assert kummer_m_quadrature(1.0, 2.0, 1.0) == pytest.approx(math.e - 1.0, rel=1e-12)

    def test_zero_argument(self):
        assert kummer_m_quadrature(0.5, 1.5, 0.0) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("a,b", [(1.0, 1.0), (1.2, 0.5), (0.0, 1.0), (-0.5, 2.0)])
    def test_domain(self, a, b):
        with pytest.raises(SpecialFunctionDomainError):
            kummer_m_quadrature(a, b, 1.0)


class TestDomain:
    @pytest.mark.parametrize("b", [0.0, -1.0, -2.0 + 1e-10, -3.0])
    def test_pole_rejected(self, b):
        with pytest.raises(SpecialFunctionDomainError):
            kummer_m(0.5, b, 1.0)
        with pytest.raises(SpecialFunctionDomainError):
            kummer_m_log(0.5, b, 1.0)

    def test_non_finite_rejected(self):
        with pytest.raises(SpecialFunctionDomainError):
            kummer_m(0.5, 1.0, math.inf)

    def test_near_pole_but_outside_tolerance(self):
        assert kummer_m(0.5, -1.0 + 1e-6, 0.5) == pytest.approx(ref_m(0.5, -1.0 + 1e-6, 0.5), rel=1e-8)


class TestLogGamma:
    def test_examples(self):
        assert log_gamma(1.0) == pytest.approx(0.0, abs=1e-15)
        assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-13)
        assert log_gamma(6.0) == pytest.approx(math.log(120.0), rel=1e-13)

    @pytest.mark.parametrize("x", [0.0, -1.0, -0.5, math.nan])
    def test_domain(self, x):
        with pytest.raises(SpecialFunctionDomainError):
            log_gamma(x)

    def test_against_mpmath(self):
        rng = np.random.default_rng(3)
        xs = np.concatenate([rng.uniform(1e-3, 171.0, 1500), rng.uniform(1e-3, 5.0, 500)])
        for x in xs:
            ref = float(mp.loggamma(x))
            if abs(ref) >= 0.1:
                assert log_gamma(x) == pytest.approx(ref, rel=1e-13)
            else:
                # relative error is meaningless at the zeros x = 1, 2
                assert log_gamma(x) == pytest.approx(ref, abs=1e-14)


class TestIdentities:
    def test_exponential_identity(self):
        rng = np.random.default_rng(5)
        for a, z in zip(rng.uniform(1e-3, 3.0, 1000), rng.uniform(-20, 20, 1000)):
            assert abs(kummer_m(a, a, z) - math.exp(z)) <= 1e-11 * math.exp(z)

    def test_kummer_transformation(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            a, b, z = rng.uniform(0.01, 3), rng.uniform(0.1, 6), rng.uniform(-20, 20)
            lhs = kummer_m(a, b, z)
            rhs = math.exp(z) * kummer_m(b - a, b, -z)
            ref = ref_m(a, b, z)
            assert rel(lhs, ref) < 1e-10
            assert rel(rhs, ref) < 1e-10

    def test_series_matches_quadrature(self):
        rng = np.random.default_rng(9)
        for _ in range(1000):
            a = rng.uniform(0.05, 3)
            b = a + rng.uniform(0.05, 3)
            z = rng.uniform(-30, 30)
            assert rel(kummer_m(a, b, z), kummer_m_quadrature(a, b, z)) < 1e-9

    @given(a=st.floats(0.01, 5), b=st.floats(0.1, 6), z=st.floats(-20, 20))
    @settings(max_examples=300, deadline=None)
    def test_matches_mpmath(self, a, b, z):
        assert kummer_m(a, b, z) == pytest.approx(ref_m(a, b, z), rel=1e-10)

    @given(a=st.floats(-3, 3), b=st.floats(0.1, 5))
    @settings(max_examples=100, deadline=None)
    def test_zero_argument_exact(self, a, b):
        assert kummer_m(a, b, 0.0) == 1.0
