"""Finite ``m x m`` quasi-Toeplitz matrices and dense reference computations.

A finite QT matrix is ``T_m(a) + E_NW + J E_SE J`` where ``J`` is the flip
matrix and both corrections live in leading blocks.  Since
``J T_m(a) J = T_m(a~)`` with ``a~_k = a_{-k}``, the finite Widom formula

    T_m(a) T_m(b) = T_m(ab) - H_m(a^-) H_m(b^+) - J H_m(a^+) H_m(b^-) J

splits a product into two semi-infinite products, one per corner.  Terms in
which the corners of the two factors meet are added explicitly.
"""

import logging
import warnings

import numpy as np
import scipy.linalg as sla

from .config import MAX_ITER, THRESHOLD, TOL
from .correction import LowRankCorrection, lr_compress
from .exceptions import NotPositiveDefinite, SupportOverflow
from .means import MeanRequest, QTOps, compute_mean
from .qt import QTMatrix, qt_add, qt_mul, toeplitz_block
from .symbol import Symbol

__all__ = [
    "FiniteQT",
    "DenseOps",
    "fin_mul",
    "fin_mean",
    "dense_oracle_mean",
    "dense_sqrt",
    "dense_invsqrt",
    "dense_pow",
    "dense_log",
    "dense_exp",
    "flip",
    "toeplitz_dense",
    "hankel_dense",
]

logger = logging.getLogger(__name__)

#: dense eigenvalue computations are used for spectral bounds up to this size
DENSE_BOUNDS_LIMIT = 1024


def flip(m):
    """The ``m x m`` flip matrix ``J``."""
    return np.eye(m)[::-1]


def toeplitz_dense(a: Symbol, m):
    """``T_m(a)``."""
    return toeplitz_block(a, m)


def hankel_dense(a: Symbol, m, side="-"):
    """``H_m(a^-)`` (entries ``a_{-(i+j+1)}``) or ``H_m(a^+)`` (``a_{i+j+1}``)."""
    k = np.add.outer(np.arange(m), np.arange(m)) + 1
    if side == "-":
        coeffs = a.window(-(2 * m - 1), -1)[::-1]  # a_{-1}, a_{-2}, ...
    elif side == "+":
        coeffs = a.window(1, 2 * m - 1)
    else:
        raise ValueError("side must be '-' or '+'")
    return coeffs[k - 1]


class FiniteQT:
    """Finite quasi-Toeplitz matrix ``T_m(a) + E_NW + J E_SE J``.

    Parameters
    ----------
    m : int
        Matrix size.
    symbol : Symbol
    nw, se : LowRankCorrection, optional
        Corner corrections; ``se`` is stored flipped, so its leading block
        describes the bottom-right corner read from the last index backwards.

    Raises
    ------
    SupportOverflow
        If a corner correction does not fit in the matrix.

    Notes
    -----
    With bandwidth and corner supports of at most ``m / 4`` the corners of a
    product never meet.  :func:`fin_mul` does not rely on this: terms where
    the corners meet are kept exactly, and a corner may grow to ``m``
    columns.  Symbol coefficients of index ``|k| >= m`` do not enter
    ``T_m(a)`` and are dropped on construction.
    """

    __slots__ = ("m", "symbol", "nw", "se", "self_adjoint", "positive_definite")

    def __init__(self, m, symbol, nw=None, se=None, *, self_adjoint=False, positive_definite=False):
        if not isinstance(symbol, Symbol):
            symbol = Symbol.constant(symbol)
        self.m = int(m)
        if self.m < 1:
            raise ValueError("matrix size must be positive")
        if symbol.lo <= -self.m or symbol.hi >= self.m:
            # coefficients beyond the matrix size never enter T_m(a)
            w = self.m - 1
            symbol = Symbol(symbol.window(-w, w), -w, trunc_eps=0.0)
        self.symbol = symbol
        self.nw = LowRankCorrection.zero() if nw is None else nw
        self.se = LowRankCorrection.zero() if se is None else se
        self.self_adjoint = bool(self_adjoint or positive_definite)
        self.positive_definite = bool(positive_definite)
        s = max(self.nw.support, self.se.support)
        if s > self.m:
            raise SupportOverflow(f"corner support {s} exceeds the size m={self.m}")

    @classmethod
    def from_qt(cls, A: QTMatrix, m):
        """Leading ``m x m`` section of a semi-infinite QT matrix."""
        return cls(m, A.symbol, A.correction, None,
                   self_adjoint=A.self_adjoint, positive_definite=A.positive_definite)

    @classmethod
    def toeplitz(cls, m, symbol, **flags):
        return cls(m, symbol, **flags)

    @classmethod
    def identity(cls, m):
        return cls(m, Symbol.constant(1.0), self_adjoint=True, positive_definite=True)

    def identity_like(self):
        return FiniteQT.identity(self.m)

    def _corners(self):
        return QTMatrix(self.symbol, self.nw), QTMatrix(self.symbol.reflect(), self.se)

    @classmethod
    def _from_corners(cls, m, nw: QTMatrix, se: QTMatrix, **flags):
        return cls(m, nw.symbol, nw.correction, se.correction, **flags)

    @property
    def shape(self):
        return (self.m, self.m)

    @property
    def support(self):
        return max(self.nw.support, self.se.support)

    @property
    def rank(self):
        return self.nw.rank + self.se.rank

    @property
    def bandwidth(self):
        return self.symbol.bandwidth

    def __repr__(self):
        return (
            f"FiniteQT(m={self.m}, symbol=[{self.symbol.lo}..{self.symbol.hi}], "
            f"nw={self.nw.support}/{self.nw.rank}, se={self.se.support}/{self.se.rank})"
        )

    def to_dense(self):
        m = self.m
        D = toeplitz_block(self.symbol, m).astype(np.result_type(self.symbol.dtype, self.nw.dtype, self.se.dtype))
        if self.nw.rank:
            D += self.nw.to_dense(m, m)
        if self.se.rank:
            D += self.se.to_dense(m, m)[::-1, ::-1]
        return D

    def truncate(self, k=None):
        D = self.to_dense()
        return D if k is None else D[:k, :k]

    # -- arithmetic ---------------------------------------------------------

    def _check_same(self, other):
        if not isinstance(other, FiniteQT):
            other = FiniteQT(self.m, Symbol.constant(other))
        if other.m != self.m:
            raise ValueError(f"size mismatch: {self.m} vs {other.m}")
        return other

    def __matmul__(self, other):
        return fin_mul(self, other)

    def _lin(self, other, alpha, beta):
        other = self._check_same(other)
        (an, as_), (bn, bs) = self._corners(), other._corners()
        sa = self.self_adjoint and other.self_adjoint and np.isrealobj(alpha) and np.isrealobj(beta)
        return FiniteQT._from_corners(
            self.m, qt_add(an, bn, alpha, beta), qt_add(as_, bs, alpha, beta), self_adjoint=sa
        )

    def __add__(self, other):
        return self._lin(other, 1.0, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._lin(other, 1.0, -1.0)

    def __rsub__(self, other):
        return self._check_same(other) - self

    def __neg__(self):
        return self * -1.0

    def __mul__(self, alpha):
        if isinstance(alpha, FiniteQT):
            return NotImplemented
        sa = self.self_adjoint and np.isrealobj(alpha)
        pd = self.positive_definite and np.isrealobj(alpha) and alpha > 0
        return FiniteQT(self.m, self.symbol.scale(alpha), self.nw.scale(alpha), self.se.scale(alpha),
                        self_adjoint=sa, positive_definite=pd)

    __rmul__ = __mul__

    def __truediv__(self, alpha):
        return self * (1.0 / alpha)

    def adjoint(self):
        return FiniteQT(self.m, self.symbol.conj_reflect(), self.nw.adjoint(), self.se.adjoint(),
                        self_adjoint=self.self_adjoint, positive_definite=self.positive_definite)

    def hermitian_part(self, threshold=THRESHOLD):
        nw, se = (C.hermitian_part(threshold) for C in self._corners())
        return FiniteQT._from_corners(self.m, nw, se, self_adjoint=True,
                                      positive_definite=self.positive_definite)

    def compress(self, threshold=THRESHOLD):
        nw, se = (C.compress(threshold) for C in self._corners())
        return FiniteQT._from_corners(self.m, nw, se, self_adjoint=self.self_adjoint,
                                      positive_definite=self.positive_definite)

    def with_flags(self, **flags):
        return FiniteQT(self.m, self.symbol, self.nw, self.se, **flags)

    # -- norms and checks ---------------------------------------------------

    def norm(self):
        """Wiener norm of the symbol plus the spectral norms of both corners.

        Once the corners meet, the split between symbol and corners is no
        longer unique and this bound can stay large while the matrix itself
        is small; the exact spectral norm is used instead for moderate ``m``.
        """
        if self.nw.support + self.se.support > self.m and self.m <= DENSE_BOUNDS_LIMIT:
            return float(np.linalg.norm(self.to_dense(), 2))
        return self.symbol.wiener_norm() + self.nw.norm2() + self.se.norm2()

    def spectral_bounds(self):
        beta = self.norm()
        if self.m <= DENSE_BOUNDS_LIMIT:
            D = self.to_dense()
            lam = sla.eigvalsh(0.5 * (D + D.conj().T), subset_by_index=[0, 0])[0]
            return float(lam), beta
        amin, _ = self.symbol.grid_range()
        return amin - self.nw.norm2() - self.se.norm2(), beta

    def is_self_adjoint(self, tol=1e-13):
        return all(C.is_self_adjoint(tol) for C in self._corners())

    def check_positive_definite(self):
        if not self.is_self_adjoint(1e-12):
            raise NotPositiveDefinite("matrix is not self-adjoint")
        D = self.to_dense()
        try:
            np.linalg.cholesky(0.5 * (D + D.conj().T))
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite(f"{self.m}x{self.m} matrix is not positive definite") from None
        return self.with_flags(self_adjoint=True, positive_definite=True)


def _clip(E, m):
    if E.rows_u <= m and E.rows_v <= m:
        return E
    return LowRankCorrection(E.U[:m], E.V[:m])


def _flip_rows(X, m):
    """``J X`` for a block of leading rows, returned with ``m`` rows."""
    out = np.zeros((m, X.shape[1]), dtype=X.dtype)
    out[m - X.shape[0]:] = X[::-1]
    return out


def _cross(E, F, m):
    """Factors ``(U, V)`` of ``E J F J`` for corrections of opposite corners.

    ``E J F J = U_E (V_E^H J U_F) (J V_F)^H`` lives in the rows of ``E``'s
    corner but may span all ``m`` columns.  ``None`` when the corners do
    not meet.
    """
    if not E.rank or not F.rank or E.rows_v + F.rows_u <= m:
        return None
    C = E.V.conj().T @ _flip_rows(F.U, m)[: E.rows_v]
    return E.U, _flip_rows(F.V, m) @ C.conj().T


def _with_cross(E, cross, threshold, scale):
    if cross is None:
        return E
    F = LowRankCorrection.from_blocks([E.U, cross[0]], [E.V, cross[1]])
    return lr_compress(F, threshold, scale=scale)


def fin_mul(A: FiniteQT, B: FiniteQT, threshold=THRESHOLD):
    """Product of finite QT matrices by the finite Widom formula.

    Each corner is the correction of a semi-infinite product clipped to
    ``m x m``.  When the corners of the factors meet, the cross products
    ``E_NW J F_SE J`` and ``J E_SE J F_NW`` are added to the corner owning
    their rows, so the product stays exact.
    """
    B = A._check_same(B)
    m = A.m
    (an, as_), (bn, bs) = A._corners(), B._corners()
    nw, se = qt_mul(an, bn, threshold), qt_mul(as_, bs, threshold)
    scale = nw.symbol.wiener_norm()
    E_nw = _with_cross(_clip(nw.correction, m), _cross(A.nw, B.se, m), threshold, scale)
    E_se = _with_cross(_clip(se.correction, m), _cross(A.se, B.nw, m), threshold, scale)
    return FiniteQT(m, nw.symbol, E_nw, E_se)


# -- dense reference --------------------------------------------------------


def _herm(A):
    return 0.5 * (A + A.conj().T)


def _eigh_pd(A):
    w, V = np.linalg.eigh(_herm(A))
    if w[0] <= 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e} is not positive")
    return w, V


def _funm(w, V, f):
    return _herm((V * f(w)) @ V.conj().T)


def dense_sqrt(A):
    return _funm(*_eigh_pd(A), np.sqrt)


def dense_invsqrt(A):
    return _funm(*_eigh_pd(A), lambda w: 1.0 / np.sqrt(w))


def dense_pow(A, t):
    return _funm(*_eigh_pd(A), lambda w: w ** float(t))


def dense_log(A):
    return _funm(*_eigh_pd(A), np.log)


def dense_exp(A):
    w, V = np.linalg.eigh(_herm(A))
    return _funm(w, V, np.exp)


class DenseOps:
    """Eigendecomposition-based counterparts of :class:`~qtmeans.means.QTOps`."""

    def __init__(self, tol=TOL, max_iter=MAX_ITER):
        self.tol = tol
        self.max_iter = max_iter

    def roots(self, A, cache=None):
        key = id(A)
        if cache is not None and key in cache:
            return cache[key][1]
        w, V = _eigh_pd(A)
        r = (_funm(w, V, np.sqrt), _funm(w, V, lambda x: 1.0 / np.sqrt(x)))
        if cache is not None:
            cache[key] = (A, r)
        return r

    def sharp(self, A, B, t, cache=None):
        if t == 0:
            return A
        if t == 1:
            return B
        Ah, Aih = self.roots(A, cache)
        C = dense_pow(Aih @ B @ Aih, t)
        return _herm(Ah @ C @ Ah)

    def norm(self, A):
        return float(np.linalg.norm(A, 2))

    def rel_change(self, new, old):
        return self.norm(new - old) / self.norm(old)

    def congruence(self, S, A):
        return _herm(S @ A @ S)

    def log(self, A):
        return dense_log(A)

    def exp(self, A):
        return dense_exp(A)

    def add(self, A, B):
        return A + B

    def scale(self, A, c):
        return A * c


def dense_oracle_mean(kind, matrices, tol=1e-12, weights=None, max_iter=MAX_ITER, full_output=False):
    """Reference mean of dense symmetric positive definite matrices.

    Runs the same iterations as :mod:`qtmeans.means` with eigendecomposition
    based matrix functions.
    """
    mats = [np.atleast_2d(np.asarray(M)) for M in matrices]
    for M in mats:
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("dense inputs must be square matrices")
        _eigh_pd(M)
    req = MeanRequest(mats, kind=kind, weights=weights, tol=tol, max_iter=max_iter, check=False)
    res = compute_mean(req, ops=DenseOps(tol, max_iter))
    return res if full_output else res.mean


def fin_mean(kind, matrices, tol=TOL, weights=None, max_iter=MAX_ITER, dense_fallback=True):
    """Mean of finite QT matrices using finite QT arithmetic throughout.

    When an intermediate result breaks the support rule, the whole mean is
    recomputed densely (with a warning) unless ``dense_fallback`` is false,
    in which case :class:`SupportOverflow` propagates.  Returns a
    :class:`~qtmeans.means.MeanResult`; after a fallback its ``mean`` is a
    dense array and ``dense_fallback`` is set.
    """
    mats = list(matrices)
    sizes = {M.m for M in mats}
    if len(sizes) != 1:
        raise ValueError("all matrices must have the same size")
    req = MeanRequest(mats, kind=kind, weights=weights, tol=tol, max_iter=max_iter)
    try:
        return compute_mean(req, ops=QTOps(tol, max_iter))
    except SupportOverflow as exc:
        if not dense_fallback:
            raise
        msg = f"finite QT arithmetic overflowed ({exc}); recomputing the mean densely"
        logger.warning(msg)
        warnings.warn(msg, RuntimeWarning)
    res = dense_oracle_mean(kind, [M.to_dense() for M in mats], tol, req.weights, max_iter, True)
    res.dense_fallback = True
    return res
