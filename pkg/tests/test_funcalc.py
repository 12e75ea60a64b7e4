from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import family_matrices, random_banded, rel_err
from qtmeans import NoConvergence, NotPositiveDefinite, QTMatrix, Symbol
from qtmeans.finite import dense_exp, dense_invsqrt, dense_log, dense_pow, dense_sqrt
from qtmeans.funcalc import (
    as_rational,
    qt_exp,
    qt_inv,
    qt_log,
    qt_pow_rational,
    qt_proot,
    qt_sharp,
    qt_sqrt,
    scalar_cr_sequence,
    scalar_proot_sequence,
)
from qtmeans.symbol import sym_apply, sym_eval

GRID = 2 * np.pi * np.arange(2048) / 2048
BIG, BLOCK = 600, 100


def grid(M):
    return sym_eval(M.symbol, GRID, real=True)


def rel_qt(X, Y):
    return (X - Y).norm() / Y.norm()


@pytest.fixture(scope="module")
def A():
    return family_matrices(1.0)[1]


@pytest.fixture(scope="module")
def pair():
    return family_matrices(1.0)[0], family_matrices(1.0)[2]


class TestInverse:
    def test_identity(self):
        X = qt_inv(QTMatrix.identity())
        assert rel_qt(X, QTMatrix.identity()) == 0.0

    def test_constant(self):
        X = qt_inv(QTMatrix(4.0, positive_definite=True))
        assert X.symbol.isclose(Symbol.constant(0.25), atol=1e-15) and X.rank == 0

    def test_family_against_dense(self, A):
        X = qt_inv(A)
        ref = np.linalg.inv(A.truncate(BIG))[:BLOCK, :BLOCK]
        assert rel_err(X.truncate(BLOCK), ref) <= 1e-10

    def test_trace(self, A):
        X, trace = qt_inv(A, full_output=True)
        assert trace.converged and trace.residual <= 1e-13
        lines = trace.to_csv().splitlines()
        assert lines[0] == "iter,residual" and len(lines) == len(trace.residual_history) + 1

    def test_trace_file(self, A, tmp_path):
        _, trace = qt_inv(A, full_output=True)
        trace.to_csv(tmp_path / "trace.csv")
        assert (tmp_path / "trace.csv").read_text() == trace.to_csv()

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            qt_inv(QTMatrix(Symbol.trig(0.5, 1.0)))

    def test_iteration_cap(self, A):
        with pytest.raises(NoConvergence) as info:
            qt_inv(A, max_iter=1)
        assert info.value.trace is not None

    @settings(max_examples=10)
    @given(st.integers(0, 2**31))
    def test_random_residual(self, seed):
        B = random_banded(np.random.default_rng(seed), rank=2).check_positive_definite()
        X = qt_inv(B)
        assert (QTMatrix.identity() - B @ X).norm() <= 1e-12


class TestSqrt:
    def test_identity(self):
        assert rel_qt(qt_sqrt(QTMatrix.identity()), QTMatrix.identity()) <= 1e-15

    def test_constant(self):
        S = qt_sqrt(QTMatrix(9.0, positive_definite=True))
        assert S.symbol.isclose(Symbol.constant(3.0), atol=1e-14) and S.rank == 0

    def test_family(self, A):
        S, trace = qt_sqrt(A, full_output=True)
        assert trace.converged
        assert (S @ S - A).norm() <= 1e-10 * A.norm()
        ref = sym_eval(sym_apply("sqrt", A.symbol, 1e-15), GRID, real=True)
        assert np.abs(grid(S) - ref).max() <= 1e-10

    def test_with_inverse(self, A):
        S, Sinv = qt_sqrt(A, with_inverse=True)
        assert (S @ Sinv - QTMatrix.identity()).norm() <= 1e-12

    def test_commuting_consistency(self, A):
        S = qt_sqrt((A @ A).hermitian_part().with_flags(positive_definite=True))
        assert (S - A).norm() <= 1e-9 * A.norm()

    def test_dense_oracle(self, A):
        ref = dense_sqrt(A.truncate(BIG))[:BLOCK, :BLOCK]
        assert rel_err(qt_sqrt(A).truncate(BLOCK), ref) <= 1e-10

    @settings(max_examples=8)
    @given(st.integers(0, 2**31))
    def test_random_residual(self, seed):
        B = random_banded(np.random.default_rng(seed), rank=2).check_positive_definite()
        S = qt_sqrt(B)
        assert (S @ S - B).norm() <= 1e-11 * B.norm()


class TestProot:
    @pytest.mark.parametrize("p", [2, 3, 5])
    def test_identity(self, p):
        assert rel_qt(qt_proot(QTMatrix.identity(), p), QTMatrix.identity()) <= 1e-14

    def test_constant(self):
        Y = qt_proot(QTMatrix(27.0, positive_definite=True), 3)
        assert Y.symbol.isclose(Symbol.constant(3.0), atol=1e-13)

    @pytest.mark.parametrize("p", [2, 3, 5])
    def test_family(self, A, p):
        Y = qt_proot(A, p)
        P = Y
        for _ in range(p - 1):
            P = P @ Y
        assert (P - A).norm() <= 1e-9 * A.norm()
        ref = sym_eval(sym_apply(("power", 1 / p), A.symbol, 1e-15), GRID, real=True)
        assert np.abs(grid(Y) - ref).max() <= 1e-10

    def test_invalid_order(self, A):
        with pytest.raises(ValueError):
            qt_proot(A, 0)


class TestRationalPower:
    def test_zero_exponent(self, A):
        assert rel_qt(qt_pow_rational(A, 0, 1), QTMatrix.identity()) == 0.0

    def test_unit_exponent(self, A):
        assert qt_pow_rational(A, 1, 1) is A

    def test_two_thirds_dense(self, A):
        X = qt_pow_rational(A, 2, 3)
        ref = dense_pow(A.truncate(BIG), 2 / 3)[:BLOCK, :BLOCK]
        assert rel_err(X.truncate(BLOCK), ref) <= 1e-9

    def test_out_of_range(self, A):
        with pytest.raises(ValueError):
            qt_pow_rational(A, 3, 2)

    def test_rational_approximation(self):
        assert as_rational(0.25) == Fraction(1, 4)
        assert as_rational(1 / 3) == Fraction(1, 3)
        assert as_rational(np.pi - 3).denominator <= 64


class TestLogExp:
    def test_log_identity(self):
        L = qt_log(QTMatrix.identity())
        assert L.norm() <= 1e-15

    def test_exp_zero(self):
        E = qt_exp(QTMatrix(0.0, self_adjoint=True))
        assert rel_qt(E, QTMatrix.identity()) <= 1e-15

    def test_log_symbol(self, A):
        L = qt_log(A)
        ref = sym_eval(sym_apply("log", A.symbol, 1e-15), GRID, real=True)
        assert np.abs(grid(L) - ref).max() <= 1e-8

    def test_log_dense(self, A):
        ref = dense_log(A.truncate(BIG))[:BLOCK, :BLOCK]
        assert rel_err(qt_log(A).truncate(BLOCK), ref) <= 1e-9

    def test_exp_dense(self):
        B = QTMatrix(Symbol.trig(0.3, 0.4, -0.1), self_adjoint=True)
        ref = dense_exp(B.truncate(BIG))[:BLOCK, :BLOCK]
        assert rel_err(qt_exp(B).truncate(BLOCK), ref) <= 1e-11

    def test_roundtrip(self, A):
        assert rel_qt(qt_exp(qt_log(A)), A) <= 10 * 1e-13


class TestSharp:
    def test_idempotent(self, A):
        assert rel_qt(qt_sharp(A, A, 0.5), A) <= 1e-12

    def test_scalars(self):
        G = qt_sharp(QTMatrix(4.0, positive_definite=True), QTMatrix(9.0, positive_definite=True), 0.5)
        assert G.symbol.isclose(Symbol.constant(6.0), atol=1e-13)

    def test_endpoints(self, pair):
        A1, A2 = pair
        assert qt_sharp(A1, A2, 0) is A1
        assert qt_sharp(A1, A2, 1) is A2

    def test_family_two_thirds(self, pair):
        A1, A2 = pair
        G = qt_sharp(A1, A2, Fraction(2, 3))
        ref = grid(A1) ** (1 / 3) * grid(A2) ** (2 / 3)
        assert np.abs(grid(G) - ref).max() <= 1e-9
        a, b = A1.truncate(BIG), A2.truncate(BIG)
        h, hi = dense_sqrt(a), dense_invsqrt(a)
        dense = h @ dense_pow(hi @ b @ hi, 2 / 3) @ h
        assert rel_err(G.truncate(BLOCK), dense[:BLOCK, :BLOCK]) <= 1e-8

    def test_symmetry(self, pair):
        A1, A2 = pair
        assert rel_qt(qt_sharp(A1, A2, 0.5), qt_sharp(A2, A1, 0.5)) <= 1e-11


class TestScalarMonotonicity:
    X = np.linspace(0.0, 1.0, 1001)
    EPS = np.finfo(float).eps

    @pytest.mark.parametrize("x", [0.01, 0.25, 0.9])
    def test_cr_decreasing(self, x):
        seq = scalar_cr_sequence(x, 60)
        d = np.diff(seq)
        assert np.all(d <= 0)
        # strict while the step is representable
        active = seq[:-1] - np.sqrt(x) > 4 * self.EPS
        assert np.all(d[active] < 0)
        assert abs(seq[-1] - np.sqrt(x)) <= 2 * self.EPS

    @pytest.mark.parametrize("p", [2, 3, 5])
    def test_proot_monotone(self, p):
        m, y = scalar_proot_sequence(self.X, p, 60)
        assert m.min() >= 0 and m.max() <= 1
        dm, dy = np.diff(m, axis=0), np.diff(y, axis=0)
        assert np.all(dm >= 0) and np.all(dy <= 0)
        inner = (self.X > 0) & (self.X < 1)
        assert np.all(dm[(m[:-1] < 1) & inner] > 0)
        assert np.all(dy[(1 - m[:-1] > 2 * p * self.EPS) & inner] < 0)

    @pytest.mark.parametrize("p", [2, 3, 5])
    def test_proot_bounded_below(self, p):
        _, y = scalar_proot_sequence(self.X, p, 60)
        root = self.X ** (1 / p)
        # y_k^p m_k = x with m_k <= 1; the rounded root may sit an ulp above
        assert np.all(y >= root * (1 - 4 * self.EPS))
        assert np.abs(y[-1] - root)[1:].max() <= 4 * self.EPS
