import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fibosc.algebra import DeformationParams, ladder_matrices, spectrum_table
from fibosc.coupling import bohr_spectrum, is_generic, kraus_from_coupling, kraus_sum
from fibosc.errors import UnknownFrequency


def brute_force_classes(eps, tol=1e-9):
    out = {}
    for n in range(len(eps)):
        for m in range(len(eps)):
            g = eps[n] - eps[m]
            if g > tol:
                key = next((k for k in out if abs(k - g) <= tol), g)
                out.setdefault(key, []).append((n, m))
    return out


def ket_bra(dim, j, k):
    x = np.zeros((dim, dim))
    x[j, k] = 1.0
    return x


class TestBohrSpectrum:
    def test_r2_q1(self, p21):
        spec = bohr_spectrum(spectrum_table(p21, 4), tol=1e-9)
        assert spec.omegas == (1.0, 2.0, 3.0, 4.0, 6.0, 7.0)
        assert spec.pairs == {1.0: [(1, 0)], 3.0: [(2, 0)], 4.0: [(3, 2)], 7.0: [(3, 0)],
                              2.0: [(2, 1)], 6.0: [(3, 1)]}
        assert spec.boundary_pairs == {(3, 0), (3, 1), (3, 2)}

    def test_two_levels(self, p21):
        spec = bohr_spectrum(spectrum_table(p21, 2))
        assert spec.omegas == (1.0,) and spec.pairs == {1.0: [(1, 0)]}

    def test_fibonacci(self, fib):
        spec = bohr_spectrum(spectrum_table(fib, 5), tol=1e-9)
        assert sorted(spec.pairs_for(1.0)) == [(1, 0), (2, 0), (3, 1), (3, 2), (4, 3)]

    def test_unknown(self, p21):
        spec = bohr_spectrum(spectrum_table(p21, 4))
        with pytest.raises(UnknownFrequency):
            spec.find(5.0)

    def test_bad_tol(self, p21):
        with pytest.raises(ValueError):
            bohr_spectrum(spectrum_table(p21, 4), tol=0.0)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(1.2, 3.0), st.floats(-0.9, 1.0), st.integers(2, 8))
    def test_matches_brute_force(self, r, q, n):
        p = DeformationParams(r, q, 1.0)
        if p.rq_sum <= 1.05:
            return
        table = spectrum_table(p, n)
        spec = bohr_spectrum(table)
        oracle = brute_force_classes(table.eps[:n])
        assert len(spec.omegas) == len(oracle)
        got = sorted(sorted(v) for v in spec.pairs.values())
        assert got == sorted(sorted(v) for v in oracle.values())
        for w, pairs in spec.pairs.items():
            for a, b in pairs:
                assert abs(table.eps[a] - table.eps[b] - w) <= spec.tol

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1.3, 3.0), st.floats(-0.5, 1.0))
    def test_tolerance_insensitive(self, r, q):
        p = DeformationParams(r, q, 1.0)
        table = spectrum_table(p, 6)
        gaps = sorted(table.eps[n] - table.eps[m] for n in range(6) for m in range(n))
        if p.rq_sum <= 1.3 or min(np.diff(gaps)) < 1e-3:
            return
        ref = bohr_spectrum(table, tol=1e-12).pairs
        for tol in (1e-9, 1e-6):
            assert list(bohr_spectrum(table, tol=tol).pairs.values()) == list(ref.values())


class TestGeneric:
    def test_r2_q1(self, p21):
        t = spectrum_table(p21, 6)
        assert is_generic(bohr_spectrum(t), t).generic

    def test_fibonacci(self, fib):
        t = spectrum_table(fib, 5)
        g = is_generic(bohr_spectrum(t), t)
        assert not g.generic
        assert g.degenerate_levels == [(1, 2)]
        (w, pairs), = [(w, p) for w, p in g.witness.items() if abs(w - 1.0) < 1e-9]
        assert len(pairs) == 5

    def test_two_levels(self, fib):
        t = spectrum_table(fib, 2)
        assert is_generic(bohr_spectrum(t), t).generic


class TestKraus:
    def test_fibonacci_worked_example(self, fib):
        t = spectrum_table(fib, 6)
        a = ladder_matrices(t).a
        k = kraus_from_coupling(a, bohr_spectrum(t), 1.0)
        expected = ket_bra(6, 0, 1) + math.sqrt(2) * ket_bra(6, 2, 3) + math.sqrt(3) * ket_bra(6, 3, 4)
        np.testing.assert_allclose(k.d_omega, expected, atol=1e-12)
        assert k.rank == 3

    def test_free_case(self):
        # r = 1, q = 0: eps = (0, 1, 1, 1)
        t = spectrum_table(DeformationParams(1.0, 0.0, 1.0), 4)
        np.testing.assert_array_equal(t.eps[:4], [0, 1, 1, 1])
        k = kraus_from_coupling(ladder_matrices(t).a, bohr_spectrum(t), 1.0)
        np.testing.assert_array_equal(k.d_omega, ket_bra(4, 0, 1))
        assert k.rank == 1

    def test_forbidden_transition(self, p21):
        t = spectrum_table(p21, 4)
        k = kraus_from_coupling(ladder_matrices(t).a, bohr_spectrum(t), 7.0)
        assert not np.any(k.d_omega) and k.rank == 0

    def test_unknown_frequency(self, p21):
        t = spectrum_table(p21, 4)
        with pytest.raises(UnknownFrequency):
            kraus_from_coupling(np.eye(4), bohr_spectrum(t), 5.0)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1.3, 3.0), st.floats(-0.5, 1.0), st.integers(2, 8), st.integers(0, 2**31))
    def test_reconstruction_and_rank(self, r, q, n, seed):
        p = DeformationParams(r, q, 1.0)
        if p.rq_sum <= 1.3:
            return
        t = spectrum_table(p, n)
        spec = bohr_spectrum(t)
        if not is_generic(spec, t).generic:
            return
        D = np.random.default_rng(seed).normal(size=(n, n))
        # generic spectrum: sum of D_omega is the part of D moving down in energy
        lowering = np.array([[D[m, k] if t.eps[k] > t.eps[m] else 0.0 for k in range(n)]
                             for m in range(n)])
        np.testing.assert_allclose(kraus_sum(D, spec), lowering, atol=1e-14)
        for w in spec.omegas:
            assert kraus_from_coupling(D, spec, w).rank <= 1
