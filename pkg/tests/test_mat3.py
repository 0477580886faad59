"""3x3 linear algebra: worked examples, oracles, and random suites."""

import math

import numpy as np
import pytest
import scipy.linalg

from conftest import random_saddle_candidates
from coop2 import signvar
from coop2.mat3 import (
    BlockSchur3,
    CharPoly3,
    RouthVerdict,
    SchurCase,
    SpectralClassificationError,
    block_schur3,
    charpoly3,
    classify_saddle,
    cubic_roots,
    det3,
    expm3,
    kappa,
    routh_classify,
)

GOODWIN_CHARPOLY = CharPoly3(1.5, 0.74, 1.1478)


def goodwin_jacobian_at_equilibrium():
    from conftest import example_goodwin

    gw = example_goodwin()
    return gw.jac(gw.equilibrium())


class TestDet3:
    def test_identity(self):
        assert det3(np.eye(3)) == 1.0

    def test_equal_rows_singular(self):
        A = np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [0.0, 1.0, 0.0]])
        assert det3(A) == 0.0

    def test_field_noyes_equilibrium(self):
        from conftest import example_field_noyes

        fn = example_field_noyes()
        d = det3(fn.jac(fn.equilibrium()))
        assert d == pytest.approx(-1.1722, abs=1e-3)

    def test_matches_numpy_on_random(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            A = rng.normal(size=(3, 3))
            assert det3(A) == pytest.approx(np.linalg.det(A), rel=1e-10, abs=1e-12)


class TestCharpoly3:
    def test_goodwin_example(self):
        p = charpoly3(goodwin_jacobian_at_equilibrium())
        assert p.c2 == pytest.approx(1.5, abs=1e-3)
        assert p.c1 == pytest.approx(0.74, abs=1e-3)
        assert p.c0 == pytest.approx(1.1478, abs=1e-3)

    def test_field_noyes_example(self):
        """The published coefficient triple is (1630.8886, -4.8311, 1.1722).

        c2 and c0 are reproduced to full precision, which pins the
        equilibrium and parameters; the honest c1 at these parameters is
        -4.7655 (c1 is a cancellation of two ~480 terms, so the fourth
        decimal of the rate constants moves it by ~1%).  The triple is
        therefore checked relative to the coefficient scale.
        """
        from conftest import example_field_noyes

        fn = example_field_noyes()
        p = charpoly3(fn.jac(fn.equilibrium()))
        stated = np.array([1630.8886, -4.8311, 1.1722])
        got = np.array(p.coeffs())
        scale = np.max(np.abs(stated))
        assert np.all(np.abs(got - stated) <= 1e-3 * scale)

    def test_zero_matrix(self):
        assert charpoly3(np.zeros((3, 3))).coeffs() == (0.0, 0.0, 0.0)

    def test_polynomial_identity_at_sample_points(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            A = rng.normal(size=(3, 3)) * rng.choice([0.1, 1.0, 10.0])
            p = charpoly3(A)
            for s in (0.0, 1.0, -1.0):
                direct = det3(s * np.eye(3) - A)
                assert p(s) == pytest.approx(direct, rel=1e-10, abs=1e-9 * (1 + abs(direct)))


class TestCubicRoots:
    def test_goodwin_eigenvalues(self):
        roots = cubic_roots(GOODWIN_CHARPOLY)
        roots = sorted(roots, key=lambda z: z.real)
        assert roots[0] == pytest.approx(-1.5125, abs=1e-3)
        pair = sorted(roots[1:], key=lambda z: z.imag)
        assert pair[1].real == pytest.approx(0.0062, abs=1e-3)
        assert pair[1].imag == pytest.approx(0.8711, abs=1e-3)

    def test_roots_of_unity(self):
        roots = cubic_roots(CharPoly3(0.0, 0.0, -1.0))
        expected = {1.0 + 0j, complex(-0.5, math.sqrt(3) / 2), complex(-0.5, -math.sqrt(3) / 2)}
        for r in roots:
            assert min(abs(r - e) for e in expected) < 1e-12

    def test_factored_cubic(self):
        roots = sorted(cubic_roots(CharPoly3(-6.0, 11.0, -6.0)), key=lambda z: z.real)
        assert np.allclose([r.real for r in roots], [1.0, 2.0, 3.0], atol=1e-12)
        assert all(r.imag == 0.0 for r in roots)

    def test_conjugate_pairs_exact(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            p = CharPoly3(*rng.uniform(-5, 5, 3))
            roots = cubic_roots(p)
            complex_roots = [r for r in roots if r.imag != 0.0]
            if complex_roots:
                a, b = complex_roots
                assert a == b.conjugate()

    def test_thousand_random_cubics_recovered(self):
        rng = np.random.default_rng(42)
        for trial in range(1000):
            if trial % 2 == 0:
                roots = np.sort(rng.uniform(-10, 10, 3))
                p = np.poly(roots)
            else:
                re, im = rng.uniform(-10, 10), rng.uniform(0.1, 10)
                r3 = rng.uniform(-10, 10)
                roots = np.array([complex(re, im), complex(re, -im), r3])
                p = np.real(np.poly(roots))
            got = cubic_roots(CharPoly3(p[1], p[2], p[3]))
            got = np.sort_complex(got)
            want = np.sort_complex(np.asarray(roots, complex))
            assert np.max(np.abs(got - want)) < 1e-7

    def test_residual_bound(self):
        rng = np.random.default_rng(99)
        for _ in range(500):
            p = CharPoly3(*rng.uniform(-20, 20, 3))
            norm = 1.0 + max(abs(c) for c in p.coeffs())
            for r in cubic_roots(p):
                assert abs(((r + p.c2) * r + p.c1) * r + p.c0) <= 1e-9 * norm


class TestRouth:
    def test_goodwin_unstable(self):
        # 1.5 * 0.74 = 1.11 < 1.1478
        assert routh_classify(GOODWIN_CHARPOLY) is RouthVerdict.UNSTABLE

    def test_field_noyes_unstable(self):
        assert routh_classify(CharPoly3(1630.8886, -4.8311, 1.1722)) is RouthVerdict.UNSTABLE

    def test_cube_of_s_plus_one_hurwitz(self):
        assert routh_classify(CharPoly3(3.0, 3.0, 1.0)) is RouthVerdict.HURWITZ

    def test_marginal_cases(self):
        # (s^2 + 1)(s + 1): imaginary pair
        assert routh_classify(CharPoly3(1.0, 1.0, 1.0)) is RouthVerdict.MARGINAL
        # s (s + 1)(s + 2): zero eigenvalue
        assert routh_classify(CharPoly3(3.0, 2.0, 0.0)) is RouthVerdict.MARGINAL

    def test_strict_reversal_beats_equality(self):
        # diag(-1, 1, 2): c2*c1 = c0 exactly but c2 < 0 certifies instability
        assert routh_classify(charpoly3(np.diag([-1.0, 1.0, 2.0]))) is RouthVerdict.UNSTABLE

    def test_agrees_with_eigenvalues(self):
        rng = np.random.default_rng(23)
        for _ in range(300):
            A = rng.normal(size=(3, 3))
            verdict = routh_classify(charpoly3(A))
            re = np.linalg.eigvals(A).real
            if verdict is RouthVerdict.HURWITZ:
                assert np.all(re < 0)
            elif verdict is RouthVerdict.UNSTABLE:
                assert np.any(re > 0)


class TestExpm3:
    def test_zero(self):
        assert np.array_equal(expm3(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        E = expm3(np.diag([1.0, 2.0, 3.0]))
        assert np.allclose(E, np.diag(np.exp([1.0, 2.0, 3.0])), rtol=1e-12)

    def test_liouville_identity(self):
        # moderate scales: the determinant of the exponential is itself a
        # cancellation of cofactors ~ exp(3*lambda_max), so the oracle
        # loses meaning for widely spread spectra
        rng = np.random.default_rng(31)
        for _ in range(200):
            A = rng.normal(size=(3, 3)) * rng.choice([0.5, 1.0, 2.0])
            d = det3(expm3(A))
            assert d == pytest.approx(math.exp(np.trace(A)), rel=1e-8)

    def test_against_scipy_up_to_norm_100(self):
        rng = np.random.default_rng(37)
        for _ in range(100):
            A = rng.normal(size=(3, 3))
            A *= rng.uniform(0.1, 100.0) / max(1e-12, np.linalg.norm(A, np.inf))
            E = expm3(A)
            ref = scipy.linalg.expm(A)
            assert np.linalg.norm(E - ref) <= 1e-10 * np.linalg.norm(ref)


class TestClassifySaddle:
    def test_goodwin_example(self):
        spec = classify_saddle(goodwin_jacobian_at_equilibrium())
        assert spec.lambda_real == pytest.approx(-1.5125, abs=1e-3)
        zeta = spec.zeta if spec.zeta[0] > 0 else -spec.zeta
        assert np.allclose(zeta, [0.5999, -0.5393, 0.5910], atol=1e-3)
        assert np.all(np.sign(zeta) == [1.0, -1.0, 1.0])
        assert spec.pair[0].real == pytest.approx(0.0062, abs=1e-3)
        assert spec.pair[0].imag == pytest.approx(0.8711, abs=1e-3)
        assert spec.pair[0] == spec.pair[1].conjugate()

    def test_synthetic_rotation_block_round_trip(self):
        # known spectrum {-1, 0.1 +- i} conjugated so the stable
        # eigenvector alternates in sign
        core = np.zeros((3, 3))
        core[0, 0] = -1.0
        core[1:, 1:] = [[0.1, 1.0], [-1.0, 0.1]]
        rng = np.random.default_rng(51)
        for _ in range(20):
            S = rng.normal(size=(3, 3))
            S[:, 0] = [1.0, -1.0, 1.0]
            if abs(np.linalg.det(S)) < 0.3:
                continue
            A = S @ core @ np.linalg.inv(S)
            spec = classify_saddle(A)
            assert spec.lambda_real == pytest.approx(-1.0, rel=1e-9)
            assert spec.pair[0] == pytest.approx(complex(0.1, 1.0), rel=1e-9)

    def test_hurwitz_matrix_rejected(self):
        with pytest.raises(SpectralClassificationError):
            classify_saddle(-np.eye(3))

    def test_positive_determinant_rejected(self):
        with pytest.raises(SpectralClassificationError):
            classify_saddle(np.diag([1.0, 2.0, 3.0]))

    def test_random_saddle_suite(self):
        """100 strictly conformant irreducible unstable matrices with
        negative determinant: one negative real eigenvalue, a pair with
        positive real part, and an alternating stable eigenvector."""
        for A in random_saddle_candidates(1234, 100):
            spec = classify_saddle(A)
            assert spec.lambda_real < 0.0
            assert spec.pair[0].real > 0.0 and spec.pair[1].real > 0.0
            assert signvar.s_minus(signvar.snap(spec.zeta, 1e-10)) == 2


class TestBlockSchur:
    def _check_form(self, A, bs):
        resid = np.linalg.solve(bs.T, A @ bs.T) - bs.block()
        assert np.linalg.norm(resid) <= 1e-8 * max(1.0, np.linalg.norm(A))
        # first column of T carries the stable eigendirection
        e1 = np.linalg.solve(bs.T, bs.T[:, 0])
        assert np.allclose(e1, [1.0, 0.0, 0.0], atol=1e-12)

    def test_goodwin_complex_pair(self):
        A = goodwin_jacobian_at_equilibrium()
        bs = block_schur3(A, classify_saddle(A))
        assert bs.case is SchurCase.COMPLEX_PAIR
        assert bs.u1 == bs.u2 == pytest.approx(0.0062, abs=1e-3)
        assert bs.delta == 1.0
        assert bs.v1 == -bs.v2
        self._check_form(A, bs)
        assert kappa(bs) == pytest.approx(bs.u1, rel=1e-12)

    def test_diagonal_real_pair(self):
        A = np.diag([-1.0, 1.0, 2.0])
        spec = classify_saddle(A, require_alternation=False)
        bs = block_schur3(A, spec)
        assert bs.case is SchurCase.REAL_PAIR
        assert {bs.u1, bs.u2} == {1.0, 2.0}
        assert bs.v1 == bs.v2 == 0.0
        # T is axis-aligned: each column is +-1 times a basis vector
        assert np.allclose(np.abs(bs.T).max(axis=0), 1.0)
        assert np.allclose(np.linalg.norm(bs.T, axis=0), 1.0)
        self._check_form(A, bs)

    def test_synthetic_defective_pair(self):
        u = 0.7
        core = np.array([[-2.0, 0.0, 0.0], [0.0, u, 1.0], [0.0, 0.0, u]])
        rng = np.random.default_rng(77)
        found = 0
        while found < 10:
            S = rng.normal(size=(3, 3))
            S[:, 0] = [1.0, -1.0, 1.0]
            if abs(np.linalg.det(S)) < 0.3:
                continue
            A = S @ core @ np.linalg.inv(S)
            spec = classify_saddle(A)
            bs = block_schur3(A, spec)
            assert bs.case is SchurCase.DEFECTIVE_PAIR
            assert bs.v1 == 1.0 and bs.v2 == 0.0
            assert bs.delta > 1.0 / (2.0 * u)
            assert bs.delta == pytest.approx(1.0 / u, rel=1e-6)
            self._check_form(A, bs)
            assert kappa(bs) > 0.0
            found += 1

    def test_quadratic_form_positive_definite_on_suite(self):
        """The symmetric part of the unstable block must be positive
        definite for every matrix of the random saddle suite."""
        for A in random_saddle_candidates(777, 100):
            bs = block_schur3(A, classify_saddle(A))
            m = (bs.v1 / bs.delta + bs.delta * bs.v2) / 2.0
            S = np.array([[bs.u1, m], [m, bs.u2]])
            assert np.min(np.linalg.eigvalsh(S)) > 0.0
            assert kappa(bs) == pytest.approx(np.min(np.linalg.eigvalsh(S)), rel=1e-10)
            self._check_form(A, bs)
