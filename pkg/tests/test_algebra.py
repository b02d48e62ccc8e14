import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fibosc.algebra import (DeformationParams, bohr_frequency, commutation_residuals,
                            ladder_matrices, max_safe_level, monotonicity_report,
                            omega_closed_form, qr_integer, spectrum_table)
from fibosc.errors import DegenerateParams, NegativeEigenvalue, RegionViolation


def recurrence_oracle(r, q, n):
    """eps_0..eps_n from the two-term recurrence."""
    e = [0.0, 1.0]
    for _ in range(n - 1):
        e.append((r + q) * e[-1] - r * q * e[-2])
    return e[:n + 1]


region_a = st.tuples(st.floats(1.001, 4.0), st.floats(-1.0, 1.0)).filter(
    lambda t: t[0] + t[1] >= 1.0)


class TestParams:
    def test_regions(self):
        p = DeformationParams(2.7, -2.0 / 3.0, 1.0)
        assert p.region_a and p.region_b and p.region_c
        assert not DeformationParams(1.5, 0.4, 1.0).region_b
        assert not DeformationParams(1.5, -0.8, 1.0).region_c
        assert DeformationParams(1.5, 1.0, 1.0).region_b  # q = 1 accepted

    def test_invalid(self):
        with pytest.raises(DegenerateParams):
            DeformationParams(1.0, 1.0, 1.0)
        with pytest.raises(DegenerateParams):
            DeformationParams(2.0, 1.0, 0.0)
        with pytest.raises(DegenerateParams):
            DeformationParams(2.0, 1.0, math.nan)

    def test_diagnostic_names_inequality(self):
        with pytest.raises(RegionViolation, match=r"r\+q >= 1 required, got 0.9"):
            DeformationParams(1.4, -0.5, 1.0).require("A")
        with pytest.raises(RegionViolation, match="r > 1 required, got 1$"):
            DeformationParams(1.0, 0.5, 1.0).require("A")

    def test_boundary_is_degenerate_downstream(self, fib):
        fib.require("A")
        with pytest.raises(DegenerateParams):
            fib.require("A+")


class TestQrInteger:
    def test_fibonacci(self, fib):
        assert [qr_integer(fib, n) for n in range(6)] == pytest.approx([0, 1, 1, 2, 3, 5], rel=1e-14)
        assert qr_integer(fib, 5) == pytest.approx(5.0, rel=1e-14)

    def test_base_cases_exact(self, p21):
        assert qr_integer(p21, 0) == 0.0
        assert qr_integer(p21, 1) == 1.0

    def test_r2_q1(self, p21):
        assert qr_integer(p21, 3) == 7.0

    def test_overflow(self):
        p = DeformationParams(1e3, 0.5, 1.0)
        with pytest.raises(OverflowError):
            qr_integer(p, 200)
        with pytest.raises(OverflowError):
            qr_integer(DeformationParams(1.01, 0.5, 1.0), 2000)

    @settings(max_examples=60, deadline=None)
    @given(region_a)
    def test_recurrence_residual(self, rq):
        r, q = rq
        table = spectrum_table(DeformationParams(r, q, 1.0), 200)
        assert table.recurrence_residual() <= 1e-9
        assert table.eps[0] == 0.0 and table.eps[1] == 1.0

    @settings(max_examples=40, deadline=None)
    @given(region_a, st.integers(2, 60))
    def test_matches_recurrence_oracle(self, rq, n):
        r, q = rq
        expected = recurrence_oracle(r, q, n)[n]
        assert qr_integer(DeformationParams(r, q, 1.0), n) == pytest.approx(expected, rel=1e-9)

    def test_max_safe_level(self):
        p = DeformationParams(2.0, 1.0, 1.0)
        n = max_safe_level(p)
        assert spectrum_table(p, n).eps[n] < 1e300


class TestBohrFrequency:
    def test_values(self, p21, fib):
        t = spectrum_table(p21, 4)
        assert bohr_frequency(t, 3) == 4.0
        assert bohr_frequency(t, 1) == 1.0
        assert bohr_frequency(spectrum_table(fib, 4), 2) == pytest.approx(0.0, abs=1e-15)

    def test_out_of_range(self, p21):
        with pytest.raises(IndexError):
            bohr_frequency(spectrum_table(p21, 4), 5)
        with pytest.raises(IndexError):
            bohr_frequency(spectrum_table(p21, 4), 0)

    def test_closed_form_matches_table(self):
        p = DeformationParams(1.7, -0.4, 1.0)
        t = spectrum_table(p, 40)
        for n in range(1, 41):
            assert omega_closed_form(p, n) == pytest.approx(t.omega[n], rel=1e-10)


class TestMonotonicity:
    def test_r15_q05(self):
        rep = monotonicity_report(DeformationParams(1.5, 0.5, 1.0), 50)
        assert rep.eps_nondecreasing and rep.omega_nondecreasing and rep.consistent

    def test_r12_q05(self):
        rep = monotonicity_report(DeformationParams(1.2, 0.5, 1.0), 50)
        assert not rep.omega_nondecreasing
        assert rep.first_failure["omega_nondecreasing"] == 2
        assert rep.consistent

    def test_ratio_bound_lower_q(self):
        rep = monotonicity_report(DeformationParams(2.0, -2.0 / 3.0, 1.0), 50, c=1.0)
        assert rep.ratio_bound_holds and rep.ratio_bound_analytic

    def test_ratio_bound_failure_side(self):
        # c = 0, q = -1: (1+c)(r+q) + rq = -1 < 0
        rep = monotonicity_report(DeformationParams(3.0, -1.0, 1.0), 50, c=0.0)
        assert not rep.ratio_bound_holds and rep.ratio_bound_analytic is False

    def test_eps_decreasing_below_boundary(self):
        rep = monotonicity_report(DeformationParams(1.2, -0.5, 1.0), 20)
        assert not rep.eps_nondecreasing and rep.eps_nondecreasing_analytic is False

    def test_small_n_check(self):
        with pytest.raises(ValueError):
            monotonicity_report(DeformationParams(1.5, 0.5, 1.0), 2)

    @settings(max_examples=80, deadline=None)
    @given(st.floats(1.5, 4.0), st.floats(-1.0, 1.0))
    def test_growth_lower_bound(self, r, q):
        # eps_{u+1} >= u + 1 when r + q >= 2
        p = DeformationParams(r, q, 1.0)
        if not p.region_b:
            return
        eps = spectrum_table(p, 60).eps
        assert np.all(eps[1:] >= np.arange(1, 61) * (1 - 1e-12))


class TestLadder:
    def test_r2_q1(self, p21):
        m = ladder_matrices(spectrum_table(p21, 4))
        assert m.a[0, 1] == 1.0
        assert m.a[1, 2] == pytest.approx(math.sqrt(3))
        assert m.a[2, 3] == pytest.approx(math.sqrt(7))
        assert np.count_nonzero(m.a) == 3
        np.testing.assert_array_equal(m.a_dag, m.a.T)

    def test_two_levels(self, p21):
        m = ladder_matrices(spectrum_table(p21, 2))
        np.testing.assert_array_equal(m.h_s, np.diag([0.0, 1.0]))

    def test_fibonacci(self, fib):
        m = ladder_matrices(spectrum_table(fib, 6))
        np.testing.assert_allclose(np.diag(m.h_s), [0, 1, 1, 2, 3, 5], rtol=1e-14)

    def test_number_operator_identity(self, p21):
        m = ladder_matrices(spectrum_table(p21, 12))
        np.testing.assert_allclose(m.a_dag @ m.a, m.h_s, rtol=1e-14)

    def test_negative_eps(self):
        # outside region A: r + q < 0 makes eps_2 negative
        p = DeformationParams(1.2, -1.5, 1.0)
        with pytest.raises(NegativeEigenvalue):
            ladder_matrices(spectrum_table(p, 4))


class TestCommutation:
    def test_r2_q1(self, p21):
        m = ladder_matrices(spectrum_table(p21, 10))
        assert max(commutation_residuals(m, p21)) <= 1e-10

    def test_fibonacci(self, fib):
        m = ladder_matrices(spectrum_table(fib, 12))
        assert max(commutation_residuals(m, fib)) <= 1e-10

    def test_too_small(self):
        p = DeformationParams(1.5, 0.5, 1.0)
        with pytest.raises(ValueError):
            commutation_residuals(ladder_matrices(spectrum_table(p, 2)), p)

    def test_detects_wrong_parameter(self, p21):
        m = ladder_matrices(spectrum_table(p21, 10))
        wrong = DeformationParams(2.5, 1.0, 1.0)
        assert max(commutation_residuals(m, wrong)) > 1e-3
