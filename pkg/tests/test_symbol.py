import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import family_symbols
from qtmeans import DomainError, NoConvergence, NonPositiveSymbol, Symbol
from qtmeans.symbol import interpolate, sym_apply, sym_eval, sym_geomean, sym_mul, wiener_norm

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def real_symbols(max_half=6):
    """Conjugate-symmetric real coefficient vectors centred at zero."""
    return arrays(np.float64, st.integers(1, max_half), elements=finite).map(
        lambda c: Symbol(np.concatenate([c[:0:-1], c]), -(c.size - 1))
    )


def symbols(max_len=9):
    return st.tuples(
        arrays(np.float64, st.integers(1, max_len), elements=finite),
        st.integers(-5, 5),
    ).map(lambda t: Symbol(t[0], t[1]))


class TestEvaluation:
    def test_constant(self):
        assert sym_eval(Symbol.constant(5.0), 1.3) == pytest.approx(5.0)

    def test_family_member_range(self):
        a = Symbol.trig(2 + 1.0, 1.0, 0.0)
        assert sym_eval(a, 0.0, real=True) == pytest.approx(5.0)
        lo, hi = a.grid_range(4096)
        assert lo == pytest.approx(1.0, abs=1e-14)
        assert hi == pytest.approx(5.0)

    def test_single_harmonic(self):
        assert sym_eval(Symbol([1.0], 1), math.pi) == pytest.approx(-1.0, abs=1e-15)

    @given(symbols(), st.floats(0, 2 * math.pi))
    def test_matches_direct_sum(self, a, t):
        direct = sum(c * np.exp(1j * k * t) for k, c in zip(range(a.lo, a.hi + 1), a.coeffs))
        assert abs(sym_eval(a, t) - direct) <= 1e-12 * max(1.0, a.wiener_norm())

    @given(real_symbols())
    def test_real_symbols_evaluate_real(self, a):
        vals = sym_eval(a, np.linspace(0, 2 * np.pi, 17))
        assert np.abs(vals.imag).max() <= 1e-13 * max(a.wiener_norm(), 1e-300)


class TestProduct:
    def test_identity(self):
        a = Symbol.trig(3, 2, 1)
        assert sym_mul(Symbol.constant(1.0), a).isclose(a)

    def test_expansion(self):
        b = sym_mul(Symbol([1.0, 1.0], 0), Symbol([1.0, 1.0], -1))
        assert b.isclose(Symbol([1.0, 2.0, 1.0], -1))

    def test_square_against_polynomial_product(self):
        a = Symbol([1.0, 2.0, 1.0], -1)
        # brute force: collect c_j c_k at power j + k
        out = {}
        for j, cj in zip(range(-1, 2), a.coeffs):
            for k, ck in zip(range(-1, 2), a.coeffs):
                out[j + k] = out.get(j + k, 0.0) + cj * ck
        assert sym_mul(a, a).isclose(Symbol.from_dict(out))
        assert sym_mul(a, a).isclose(Symbol([1.0, 4.0, 6.0, 4.0, 1.0], -2))

    @given(symbols(), symbols())
    def test_wiener_submultiplicative(self, a, b):
        assert wiener_norm(sym_mul(a, b)) <= wiener_norm(a) * wiener_norm(b) + 1e-12

    @given(real_symbols(), real_symbols())
    def test_conjugate_symmetry_preserved(self, a, b):
        c = sym_mul(a, b, eps=0.0)
        ref = max(c.wiener_norm(), 1.0)
        for k in range(0, c.hi + 1):
            assert abs(c.coeff(-k) - np.conj(c.coeff(k))) <= 1e-13 * ref

    def test_long_product_uses_fft_path(self, rng):
        a = Symbol(rng.standard_normal(300), -150)
        b = Symbol(rng.standard_normal(200), -80)
        c = sym_mul(a, b, eps=0.0)
        ref = np.convolve(a.coeffs, b.coeffs)
        assert c.lo == a.lo + b.lo
        assert np.abs(c.coeffs - ref).max() <= 1e-12 * np.abs(ref).max()


class TestWienerNorm:
    def test_constant(self):
        assert wiener_norm(Symbol.constant(5.0)) == 5.0

    def test_laplacian(self):
        assert wiener_norm(Symbol.trig(2, 1)) == pytest.approx(4.0)

    def test_family_member(self):
        theta = 0.3
        assert wiener_norm(Symbol.trig(3 + theta, 2, 1)) == pytest.approx(9 + theta)


class TestTruncation:
    def test_dead_padding_removed(self):
        a = Symbol([1e-20, 1.0, 2.0, 1e-19], -1, trunc_eps=1e-14)
        assert (a.lo, a.hi) == (0, 1)
        assert np.all(np.abs(a.coeffs[[0, -1]]) >= 1e-14 * np.abs(a.coeffs).max())


class TestGeomean:
    def test_equal_constants(self):
        g = sym_geomean([Symbol.constant(8.0)] * 3, 1e-14)
        assert g.isclose(Symbol.constant(8.0), atol=1e-13)

    def test_single_symbol(self):
        a = Symbol.trig(3, 1, 0.5)
        g = sym_geomean([a], 1e-14)
        assert g.distance(a) <= 1e-14 * a.wiener_norm()

    def test_family_length_and_points(self):
        g, info = sym_geomean(family_symbols(1.0), 1e-14, full_output=True)
        assert 88 <= g.numerical_length(1e-14) <= 132
        assert info.n_points == 512

    def test_pointwise_accuracy(self):
        eps = 1e-14
        syms = family_symbols(0.1)
        g = sym_geomean(syms, eps)
        grid = 2 * np.pi * np.arange(4096) / 4096
        exact = np.prod([sym_eval(a, grid, real=True) for a in syms], axis=0) ** (1 / 3)
        approx = sym_eval(g, grid, real=True)
        assert np.abs(approx - exact).max() <= 10 * eps * np.abs(approx).max()

    def test_weighted_law(self):
        syms = family_symbols(1.0)
        w = [0.5, 0.25, 0.25]
        g = sym_geomean(syms, 1e-14, weights=w)
        grid = 2 * np.pi * np.arange(1024) / 1024
        exact = np.prod([sym_eval(a, grid, real=True) ** wi for a, wi in zip(syms, w)], axis=0)
        assert np.abs(sym_eval(g, grid, real=True) - exact).max() <= 1e-13 * exact.max()

    def test_output_conjugate_symmetric(self):
        g = sym_geomean(family_symbols(1.0), 1e-14)
        assert g.lo == -g.hi
        assert np.allclose(g.coeffs, g.coeffs[::-1], atol=1e-14, rtol=0)

    def test_nonpositive_symbol(self):
        with pytest.raises(NonPositiveSymbol):
            sym_geomean([Symbol.trig(1.0, 1.0), Symbol.constant(2.0)], 1e-14)

    def test_interpolation_cap(self):
        with pytest.raises(NoConvergence):
            sym_geomean(family_symbols(0.01), 1e-14, n_cap=64)

    def test_callable_input(self):
        g = sym_geomean([lambda t: 3 + 2 * np.cos(t), Symbol.constant(3.0)], 1e-14)
        ref = sym_apply("sqrt", Symbol.trig(9, 3), 1e-14)
        assert g.distance(ref) <= 1e-13


class TestApply:
    def test_sqrt_constant(self):
        assert sym_apply("sqrt", Symbol.constant(9.0)).isclose(Symbol.constant(3.0), atol=1e-14)

    def test_reciprocal_multiplies_back(self):
        a = Symbol.trig(2 + 1.0, 1.0)
        r = sym_apply("reciprocal", a, 1e-14)
        one = sym_mul(a, r, eps=0.0)
        assert one.distance(Symbol.constant(1.0)) <= 1e-12

    def test_cube_root_matches_geomean(self):
        syms = family_symbols(1.0)
        prod = sym_mul(sym_mul(syms[0], syms[1]), syms[2])
        g1 = sym_apply(("power", 1 / 3), prod, 1e-14)
        g2 = sym_geomean(syms, 1e-14)
        lo, hi = min(g1.lo, g2.lo), max(g1.hi, g2.hi)
        assert np.abs(g1.window(lo, hi) - g2.window(lo, hi)).max() <= 1e-13

    def test_log_exp_roundtrip(self):
        a = Symbol.trig(3, 1, 0.5)
        b = sym_apply("exp", sym_apply("log", a, 1e-15), 1e-15)
        assert b.distance(a) <= 1e-13 * a.wiener_norm()

    def test_domain_error(self):
        with pytest.raises(DomainError):
            sym_apply("log", Symbol.trig(0.5, 1.0))
        with pytest.raises(DomainError):
            sym_apply("sqrt", Symbol.constant(-1.0))

    def test_unknown_function(self):
        with pytest.raises(ValueError):
            sym_apply("tanh", Symbol.constant(1.0))


class TestAliasing:
    """Interpolating ``c_k = rho^|k|`` with ``m`` points folds the tails onto ``|i| < m/2``."""

    @pytest.mark.parametrize("m", [8, 16, 32])
    def test_closed_form_tails(self, m):
        rho = 0.5
        t = 2 * np.pi * np.arange(m) / m
        values = (1 - rho**2) / (1 - 2 * rho * np.cos(t) + rho**2)
        g = interpolate(values, even=True)
        for i in range(-(m // 2) + 1, m // 2):
            tail = (rho ** (m + i) + rho ** (m - i)) / (1 - rho**m)
            assert abs(g.coeff(i) - (rho ** abs(i) + tail)) <= 1e-14

    def test_odd_number_of_points_rejected(self):
        with pytest.raises(ValueError):
            interpolate(np.ones(5))
