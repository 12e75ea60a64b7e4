"""Symbols of Toeplitz operators and FFT evaluation/interpolation.

A symbol ``a(z) = sum_k a_k z^k`` is stored by a contiguous window of Fourier
coefficients ``a_lo, ..., a_hi`` together with the index ``lo`` of the first
stored coefficient (the *offset*).  On the unit circle ``z = exp(i t)``.
"""

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import signal

from .config import EPS, THRESHOLD
from .exceptions import DomainError, NonPositiveSymbol, NoConvergence

__all__ = [
    "Symbol",
    "ScalarFunction",
    "sym_eval",
    "sym_mul",
    "sym_add",
    "wiener_norm",
    "sym_geomean",
    "sym_apply",
    "interpolate",
    "N_CAP",
]

#: largest half-size n tried by the adaptive evaluation/interpolation loop
N_CAP = 2**20
#: oversampling factor of the final positivity check
OVERSAMPLING = 4


def _as_coeff_array(values):
    c = np.array(values, copy=True)
    if c.ndim == 0:
        c = c.reshape(1)
    if c.ndim != 1:
        raise ValueError("symbol coefficients must be a 1-d sequence")
    if np.iscomplexobj(c):
        if not np.any(c.imag):
            return np.ascontiguousarray(c.real, dtype=np.float64)
        return c.astype(np.complex128)
    return c.astype(np.float64)


def _trim(c, offset, eps):
    """Drop leading/trailing coefficients below ``eps * max|c|``."""
    # scale first: |c| of a complex entry near the float max overflows
    scale = max(np.abs(c.real).max(), np.abs(c.imag).max()) if c.size else 0.0
    if scale == 0.0:
        return np.zeros(1, dtype=c.dtype), 0
    mags = np.abs(c / scale)
    keep = np.flatnonzero(mags >= eps * mags.max())
    first, last = keep[0], keep[-1]
    return c[first:last + 1], offset + int(first)


class Symbol:
    """Truncated Laurent series ``sum_{k=lo}^{hi} c_k z^k``.

    Parameters
    ----------
    coeffs : sequence of float or complex
        Coefficients ``c_lo, ..., c_hi``.
    offset : int
        Index ``lo`` of ``coeffs[0]``.
    trunc_eps : float, optional
        If given, leading and trailing coefficients of modulus below
        ``trunc_eps * max|c_k|`` are removed.

    Symbols are immutable; the arithmetic operators return new objects.
    """

    __slots__ = ("_coeffs", "_offset")

    def __init__(self, coeffs, offset=0, trunc_eps=None):
        c = _as_coeff_array(coeffs)
        offset = int(offset)
        if c.size == 0:
            c, offset = np.zeros(1), 0
        if trunc_eps is not None:
            c, offset = _trim(c, offset, trunc_eps)
        elif not np.any(c):
            c, offset = np.zeros(1, dtype=c.dtype), 0
        c.flags.writeable = False
        self._coeffs = c
        self._offset = offset

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, value):
        return cls([value], 0)

    @classmethod
    def zero(cls):
        return cls([0.0], 0)

    @classmethod
    def from_dict(cls, mapping):
        """Build from ``{k: c_k}``."""
        if not mapping:
            return cls.zero()
        lo, hi = min(mapping), max(mapping)
        dtype = complex if any(isinstance(v, complex) for v in mapping.values()) else float
        c = np.zeros(hi - lo + 1, dtype=dtype)
        for k, v in mapping.items():
            c[k - lo] = v
        return cls(c, lo)

    @classmethod
    def trig(cls, f0, f1=0.0, f2=0.0):
        """The real symbol ``f0 + 2 f1 cos t + 2 f2 cos 2t``."""
        return cls([f2, f1, f0, f1, f2], -2, trunc_eps=0.0)

    # -- structure ----------------------------------------------------------

    @property
    def coeffs(self):
        return self._coeffs

    @property
    def offset(self):
        return self._offset

    @property
    def lo(self):
        return self._offset

    @property
    def hi(self):
        return self._offset + self._coeffs.size - 1

    @property
    def dtype(self):
        return self._coeffs.dtype

    @property
    def n_negative(self):
        """Number of stored indices ``k < 0``."""
        return max(0, -self.lo)

    @property
    def n_positive(self):
        """Number of stored indices ``k > 0``."""
        return max(0, self.hi)

    @property
    def bandwidth(self):
        return max(self.n_negative, self.n_positive)

    def __len__(self):
        return self._coeffs.size

    def coeff(self, k):
        j = k - self._offset
        if 0 <= j < self._coeffs.size:
            return self._coeffs[j]
        return self._coeffs.dtype.type(0)

    def window(self, lo, hi):
        """Coefficients ``c_lo, ..., c_hi`` with zero padding."""
        out = np.zeros(max(hi - lo + 1, 0), dtype=self._coeffs.dtype)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo:b - lo + 1] = self._coeffs[a - self.lo:b - self.lo + 1]
        return out

    def negative_part(self):
        """``c_{-1}, c_{-2}, ..., c_lo`` (first column of the Hankel of ``a^-``)."""
        if self.lo >= 0:
            return np.zeros(0, dtype=self.dtype)
        return self.window(self.lo, -1)[::-1].copy()

    def positive_part(self):
        """``c_1, c_2, ..., c_hi`` (first column of the Hankel of ``a^+``)."""
        if self.hi <= 0:
            return np.zeros(0, dtype=self.dtype)
        return self.window(1, self.hi)

    def is_zero(self):
        return not np.any(self._coeffs)

    def is_real(self, tol=1e-14):
        """True if ``c_{-k} = conj(c_k)`` for all ``k`` (absolute tolerance)."""
        K = max(abs(self.lo), abs(self.hi))
        w = self.window(-K, K)
        return bool(np.all(np.abs(w - np.conj(w[::-1])) <= tol))

    def has_real_coeffs(self):
        return not np.iscomplexobj(self._coeffs)

    # -- transformations ----------------------------------------------------

    def conj_reflect(self):
        """Symbol of the adjoint, ``c_k -> conj(c_{-k})``."""
        return Symbol(np.conj(self._coeffs[::-1]), -self.hi)

    def reflect(self):
        """``c_k -> c_{-k}``, the symbol of ``J T_m(a) J``."""
        return Symbol(self._coeffs[::-1], -self.hi)

    def truncate(self, eps=EPS):
        return Symbol(self._coeffs, self._offset, trunc_eps=eps)

    def real_part(self):
        """Project onto real-valued symbols: ``(a + a*) / 2``."""
        return sym_add(self, self.conj_reflect(), alpha=0.5, beta=0.5, eps=0.0)

    def scale(self, alpha):
        if alpha == 0:
            return Symbol.zero()
        return Symbol(alpha * self._coeffs, self._offset)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, t):
        return sym_eval(self, t)

    def grid_values(self, m):
        """Values at ``t_l = 2 pi l / m`` for ``l = 0, ..., m-1``.

        Exact: coefficients are folded modulo ``m`` before a single FFT.
        """
        folded = np.zeros(m, dtype=self.dtype)
        idx = np.arange(self.lo, self.hi + 1) % m
        np.add.at(folded, idx, self._coeffs)
        return m * np.fft.ifft(folded)

    def grid_range(self, m=None):
        """``(min, max)`` of the real part on a uniform grid."""
        if m is None:
            m = _grid_size(self)
        v = self.grid_values(m).real
        return float(v.min()), float(v.max())

    def numerical_length(self, eps=EPS, grid=None):
        """Number of coefficients ``g_0, ..., g_k`` with ``|g_j| <= eps ||g||_inf`` for ``|j| > k``."""
        if grid is None:
            grid = _grid_size(self)
        sup = float(np.abs(self.grid_values(grid)).max())
        if sup == 0.0:
            return 0
        big = np.flatnonzero(np.abs(self._coeffs) > eps * sup)
        if big.size == 0:
            return 0
        idx = self._offset + big
        return int(max(abs(idx.min()), abs(idx.max()))) + 1

    def wiener_norm(self):
        return float(np.abs(self._coeffs).sum())

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Symbol):
            return sym_add(self, other)
        return sym_add(self, Symbol.constant(other))

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Symbol):
            other = Symbol.constant(other)
        return sym_add(self, other, beta=-1.0)

    def __rsub__(self, other):
        return Symbol.constant(other) - self

    def __neg__(self):
        return self.scale(-1.0)

    def __mul__(self, other):
        if isinstance(other, Symbol):
            return sym_mul(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, alpha):
        return self.scale(1.0 / alpha)

    def isclose(self, other, atol=1e-14):
        """Coefficientwise comparison over the union of the supports."""
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        return bool(np.all(np.abs(self.window(lo, hi) - other.window(lo, hi)) <= atol))

    def distance(self, other):
        """Wiener norm of the difference."""
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        return float(np.abs(self.window(lo, hi) - other.window(lo, hi)).sum())

    def __repr__(self):
        return f"Symbol(lo={self.lo}, hi={self.hi}, dtype={self.dtype})"


def _grid_size(sym, minimum=4096):
    return max(minimum, 1 << int(math.ceil(math.log2(4 * len(sym) + 1))))


def sym_eval(a: Symbol, points, real=False):
    """Evaluate ``sum_k c_k exp(i k t)`` at the angles in ``points``."""
    t = np.atleast_1d(np.asarray(points, dtype=float))
    k = np.arange(a.lo, a.hi + 1)
    out = np.empty(t.shape, dtype=complex)
    chunk = max(1, 2**22 // max(k.size, 1))
    flat_t, flat_out = t.ravel(), out.reshape(-1)
    for s in range(0, flat_t.size, chunk):
        tt = flat_t[s:s + chunk]
        flat_out[s:s + chunk] = np.exp(1j * np.outer(tt, k)) @ a.coeffs
    if real:
        out = out.real
    if np.ndim(points) == 0:
        return out[0]
    return out


def sym_add(a, b, alpha=1.0, beta=1.0, eps=THRESHOLD):
    """``alpha * a + beta * b``, truncated at ``eps``."""
    lo, hi = min(a.lo, b.lo), max(a.hi, b.hi)
    c = alpha * a.window(lo, hi) + beta * b.window(lo, hi)
    return Symbol(c, lo, trunc_eps=eps if eps > 0 else None)


def sym_mul(a, b, eps=THRESHOLD):
    """Product symbol by discrete convolution of the coefficients."""
    if min(len(a), len(b)) < 64:
        c = np.convolve(a.coeffs, b.coeffs)
    else:
        c = signal.convolve(a.coeffs, b.coeffs, method="fft")
    return Symbol(c, a.lo + b.lo, trunc_eps=eps if eps > 0 else None)


def wiener_norm(a):
    """``sum_k |c_k|``."""
    return a.wiener_norm()


# -- evaluation / interpolation ----------------------------------------------


def interpolate(values, even=False):
    """Laurent interpolant of values at the ``m``-th roots of unity.

    ``values[l]`` is the sample at ``exp(2 pi i l / m)``.  Returns the symbol
    with coefficients ``j = -n+1, ..., n`` where ``m = 2n``; the coefficient of
    index ``n`` is split evenly between ``+n`` and ``-n`` so that interpolants
    of real even data stay conjugate-symmetric (both agree on the grid).
    """
    values = np.asarray(values)
    m = values.size
    if m % 2:
        raise ValueError("number of interpolation points must be even")
    n = m // 2
    if even:
        half = np.fft.rfft(values.real) / m  # j = 0..n, real for even data
        half = half.real
        c = np.concatenate([half[:0:-1], half])  # j = -n..n
    else:
        f = np.fft.fft(values) / m
        c = np.concatenate([f[n:], f[:n + 1]])  # j = -n..n, f[n] counted twice
    c = c.copy()
    c[0] *= 0.5
    c[-1] *= 0.5
    return Symbol(c, -n)


def _stop_sums(sym, n):
    c = np.abs(sym.coeffs)
    j = np.arange(sym.lo, sym.hi + 1)
    delta = c[np.abs(j) > math.ceil(n / 2)].sum()
    return float(delta), float(c.sum())


@dataclass(frozen=True)
class InterpolationInfo:
    n: int
    n_points: int
    doublings: int
    delta: float
    kappa: float


def _adaptive(values_at, eps, even, n_start=4, n_cap=N_CAP):
    n, doublings = n_start, 0
    while True:
        m = 2 * n
        sym = interpolate(values_at(m), even=even)
        delta, kappa = _stop_sums(sym, n)
        if delta < eps * kappa or kappa == 0.0:
            return sym, InterpolationInfo(n, m, doublings, delta, kappa)
        n *= 2
        doublings += 1
        if n > n_cap:
            raise NoConvergence(f"interpolation did not settle with n <= {n_cap}")


def _sampler(a):
    """Return ``(f(m) -> values on the m-grid, real_even)`` for a Symbol or callable."""
    if isinstance(a, Symbol):
        real_even = a.has_real_coeffs() and a.is_real(tol=1e-14 * max(1.0, a.wiener_norm()))
        if real_even:
            a = a.real_part()

            def sample(m):
                folded = np.zeros(m)
                np.add.at(folded, np.arange(a.lo, a.hi + 1) % m, a.coeffs)
                half = np.fft.rfft(folded).real  # l = 0..m/2
                return np.concatenate([half, half[-2:0:-1]])
            return sample, True
        if a.is_real():
            return (lambda m: a.grid_values(m).real), False
        return a.grid_values, False
    if callable(a):
        def sample(m):
            return np.asarray(a(2 * np.pi * np.arange(m) / m))
        return sample, False
    raise TypeError(f"expected Symbol or callable, got {type(a).__name__}")


def _check_positive(vals, what):
    if np.iscomplexobj(vals):
        if np.any(np.abs(vals.imag) > 1e-13 * np.abs(vals).max()):
            raise NonPositiveSymbol(f"{what} is not real-valued")
        vals = vals.real
    lo = float(vals.min())
    if not lo > 0:
        raise NonPositiveSymbol(f"{what} has minimum {lo:.3e} <= 0 on the grid")
    return vals


def sym_geomean(symbols: Sequence, eps=EPS, weights=None, full_output=False, n_cap=N_CAP):
    """Coefficients of ``g = (a_1 ... a_p)^(1/p)`` by adaptive FFT interpolation.

    The half-size ``n`` starts at 4 and doubles until
    ``sum_{|j| > ceil(n/2)} |g_j| < eps * sum_j |g_j|``.

    Parameters
    ----------
    symbols : sequence of Symbol or callable
        Real, strictly positive symbols.  A callable maps an array of angles
        to values.
    eps : float
        Tolerance of the stopping test.
    weights : sequence of float, optional
        If given, compute ``prod a_i^{w_i}`` instead (weights must sum to 1).
    full_output : bool
        Also return an :class:`InterpolationInfo`.

    Raises
    ------
    NonPositiveSymbol
        If some ``a_i`` is not positive on the interpolation grid or on a 4x
        oversampled grid.
    NoConvergence
        If ``n`` would exceed ``n_cap``.
    """
    symbols = list(symbols)
    if not symbols:
        raise ValueError("need at least one symbol")
    p = len(symbols)
    w = np.full(p, 1.0 / p) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (p,) or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be a positive probability vector")
    samplers = [_sampler(a) for a in symbols]
    real_even = all(re for _, re in samplers)

    def values_at(m):
        logsum = np.zeros(m)
        for i, (sample, _) in enumerate(samplers):
            vals = _check_positive(sample(m), f"symbol {i}")
            logsum += w[i] * np.log(vals)
        return np.exp(logsum)

    sym, info = _adaptive(values_at, eps, real_even, n_cap=n_cap)
    for i, (sample, _) in enumerate(samplers):
        _check_positive(sample(OVERSAMPLING * info.n_points), f"symbol {i}")
    if real_even:
        sym = sym.real_part()
    return (sym, info) if full_output else sym


@dataclass(frozen=True)
class ScalarFunction:
    """A scalar function applied to a symbol's range.

    ``domain`` is one of ``"real"``, ``"positive"``, ``"nonnegative"`` or
    ``"nonzero"``.
    """

    name: str
    func: Callable
    domain: str = "real"

    @classmethod
    def power(cls, t):
        t = float(t)
        if t.is_integer():
            return cls(f"power({t:g})", lambda x: x ** int(t), "real" if t >= 0 else "nonzero")
        return cls(f"power({t:g})", lambda x: x**t, "nonnegative" if t > 0 else "positive")

    def check(self, vals):
        if self.domain == "real":
            return
        if np.iscomplexobj(vals):
            if self.domain != "nonzero":
                raise DomainError(f"{self.name} needs real values")
            bad = np.abs(vals).min() == 0
        elif self.domain == "positive":
            bad = vals.min() <= 0
        elif self.domain == "nonnegative":
            bad = vals.min() < 0
        else:
            bad = np.abs(vals).min() == 0
        if bad:
            raise DomainError(f"range of the symbol leaves the domain of {self.name}")


_NAMED = {
    "sqrt": ScalarFunction("sqrt", np.sqrt, "nonnegative"),
    "log": ScalarFunction("log", np.log, "positive"),
    "exp": ScalarFunction("exp", np.exp, "real"),
    "reciprocal": ScalarFunction("reciprocal", np.reciprocal, "nonzero"),
    "inv": ScalarFunction("reciprocal", np.reciprocal, "nonzero"),
}


def as_scalar_function(f):
    """Normalize ``"sqrt"``, ``("power", t)``, or a :class:`ScalarFunction`."""
    if isinstance(f, ScalarFunction):
        return f
    if isinstance(f, str):
        try:
            return _NAMED[f]
        except KeyError:
            raise ValueError(f"unknown scalar function {f!r}") from None
    if isinstance(f, tuple) and len(f) == 2 and f[0] == "power":
        return ScalarFunction.power(f[1])
    raise TypeError(f"cannot interpret {f!r} as a scalar function")


def sym_apply(f, a, eps=EPS, full_output=False, n_cap=N_CAP):
    """Coefficients of ``f o a`` by the same adaptive scheme as :func:`sym_geomean`.

    The interpolated coefficients carry the aliasing error
    ``sum_{k>=1} (g_{i+km} + g_{i-km})`` for ``m`` interpolation points.
    """
    f = as_scalar_function(f)
    sample, real_even = _sampler(a)
    is_real = real_even or (isinstance(a, Symbol) and a.is_real())

    def values_at(m):
        vals = sample(m)
        if is_real:
            vals = np.real(vals)
        f.check(vals)
        return f.func(vals)

    sym, info = _adaptive(values_at, eps, real_even, n_cap=n_cap)
    f.check(np.real(sample(OVERSAMPLING * info.n_points)) if is_real else sample(OVERSAMPLING * info.n_points))
    if real_even:
        sym = sym.real_part()
    return (sym, info) if full_output else sym
