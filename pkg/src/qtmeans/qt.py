"""Quasi-Toeplitz matrices ``A = T(a) + E`` and their arithmetic."""

import numpy as np
import scipy.linalg as sla

from .config import THRESHOLD
from .correction import LowRankCorrection, hankel_factors, lr_compress, toeplitz_times
from .exceptions import NotPositiveDefinite
from .symbol import Symbol, sym_add, sym_mul

__all__ = [
    "QTMatrix",
    "qt_mul",
    "qt_add",
    "qt_scale",
    "qt_adjoint",
    "qt_norm",
    "qt_norm_estimates",
    "qt_truncate",
    "toeplitz_block",
]

# cap on the dense truncation used for eigenvalue estimates
BOUNDS_MAX_SIZE = 512


def toeplitz_block(a: Symbol, rows, cols=None):
    """Leading ``rows x cols`` block of ``T(a)``, entries ``a_{j-i}``."""
    cols = rows if cols is None else cols
    col = a.window(-(rows - 1), 0)[::-1]  # a_0, a_{-1}, ...
    row = a.window(0, cols - 1)  # a_0, a_1, ...
    return sla.toeplitz(col, row)


class QTMatrix:
    """Semi-infinite quasi-Toeplitz matrix ``T(a) + E``.

    Parameters
    ----------
    symbol : Symbol or scalar
        Symbol ``a`` of the Toeplitz part.
    correction : LowRankCorrection, optional
        Compact part ``E``; zero by default.
    self_adjoint, positive_definite : bool
        Advisory flags; see :meth:`check_positive_definite`.
    """

    __slots__ = ("symbol", "correction", "self_adjoint", "positive_definite")

    def __init__(self, symbol, correction=None, *, self_adjoint=False, positive_definite=False):
        if not isinstance(symbol, Symbol):
            symbol = Symbol.constant(symbol)
        self.symbol = symbol
        self.correction = LowRankCorrection.zero() if correction is None else correction
        self.self_adjoint = bool(self_adjoint or positive_definite)
        self.positive_definite = bool(positive_definite)

    @classmethod
    def identity(cls):
        return cls(Symbol.constant(1.0), self_adjoint=True, positive_definite=True)

    @classmethod
    def from_dense_correction(cls, symbol, block, eps=THRESHOLD, **flags):
        return cls(symbol, LowRankCorrection.from_dense(block, eps), **flags)

    def identity_like(self):
        return QTMatrix.identity()

    # -- structure ----------------------------------------------------------

    @property
    def support(self):
        return self.correction.support

    @property
    def rank(self):
        return self.correction.rank

    @property
    def bandwidth(self):
        return self.symbol.bandwidth

    def __repr__(self):
        return (
            f"QTMatrix(symbol=[{self.symbol.lo}..{self.symbol.hi}], "
            f"support={self.support}, rank={self.rank})"
        )

    # -- arithmetic ---------------------------------------------------------

    def __matmul__(self, other):
        return qt_mul(self, other)

    def __add__(self, other):
        if not isinstance(other, QTMatrix):
            other = QTMatrix(other)
        return qt_add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, QTMatrix):
            other = QTMatrix(other)
        return qt_add(self, other, beta=-1.0)

    def __rsub__(self, other):
        return QTMatrix(other) - self

    def __neg__(self):
        return qt_scale(self, -1.0)

    def __mul__(self, alpha):
        if isinstance(alpha, QTMatrix):
            return NotImplemented
        return qt_scale(self, alpha)

    __rmul__ = __mul__

    def __truediv__(self, alpha):
        return qt_scale(self, 1.0 / alpha)

    def adjoint(self):
        return qt_adjoint(self)

    @property
    def H(self):
        return qt_adjoint(self)

    def hermitian_part(self, threshold=THRESHOLD):
        """``(A + A^*) / 2`` flagged self-adjoint."""
        sym = self.symbol.real_part()
        E = self.correction
        if E.rank:
            E = LowRankCorrection.from_blocks([E.U, E.V], [E.V, E.U]).scale(0.5)
            E = lr_compress(E, threshold, scale=sym.wiener_norm())
        return QTMatrix(sym, E, self_adjoint=True, positive_definite=self.positive_definite)

    def compress(self, threshold=THRESHOLD):
        sym = self.symbol.truncate(threshold)
        E = lr_compress(self.correction, threshold, scale=sym.wiener_norm())
        return QTMatrix(sym, E, self_adjoint=self.self_adjoint, positive_definite=self.positive_definite)

    def with_flags(self, **flags):
        return QTMatrix(self.symbol, self.correction, **flags)

    # -- norms and checks ---------------------------------------------------

    def norm(self):
        return qt_norm(self)

    def truncate(self, m):
        return qt_truncate(self, m)

    def is_self_adjoint(self, tol=1e-13):
        ref = max(self.norm(), np.finfo(float).tiny)
        if not self.symbol.is_real(tol * ref):
            return False
        E = self.correction
        if not E.rank:
            return True
        D = LowRankCorrection.from_blocks([E.U, E.V], [E.V, -E.U])
        return D.norm2() <= tol * ref

    def spectral_bounds(self, max_size=BOUNDS_MAX_SIZE):
        """Estimates ``(alpha, beta)`` of the extreme points of the spectrum.

        ``beta = ||A||_QT`` bounds the spectrum from above.  ``alpha`` is the
        smaller of the minimum of the symbol on a grid and the smallest
        eigenvalue of a dense leading block, which in turn is never below
        ``min a - ||E||_2``; it is an estimate, not a certified bound.
        """
        beta = self.norm()
        amin, _ = self.symbol.grid_range()
        lower = amin - self.correction.norm2()
        m = min(self.support + 2 * self.bandwidth + 32, max_size)
        lam = sla.eigvalsh(_herm(self.truncate(m)), subset_by_index=[0, 0])[0]
        alpha = min(amin, max(lower, float(lam)))
        return alpha, beta

    def check_positive_definite(self):
        """Grid positivity of the symbol plus a Cholesky test on a leading block.

        Returns ``self`` flagged positive definite, or raises
        :class:`NotPositiveDefinite`.
        """
        if not self.is_self_adjoint(1e-12):
            raise NotPositiveDefinite("matrix is not self-adjoint")
        amin, _ = self.symbol.grid_range()
        if not amin > 0:
            raise NotPositiveDefinite(f"symbol minimum {amin:.3e} is not positive")
        m = max(self.support + self.bandwidth, 1)
        try:
            np.linalg.cholesky(_herm(self.truncate(m)))
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite(f"leading {m}x{m} block is not positive definite") from None
        return self.with_flags(self_adjoint=True, positive_definite=True)


def _herm(M):
    return 0.5 * (M + M.conj().T)


def qt_mul(A: QTMatrix, B: QTMatrix, threshold=THRESHOLD):
    """Product via ``T(a) T(b) = T(ab) - H(a^-) H(b^+)``.

    The correction is assembled in factored form from the Hankel term and the
    cross terms ``T(a) E_B``, ``E_A T(b)`` and ``E_A E_B``, then compressed.
    """
    a, b = A.symbol, B.symbol
    c = sym_mul(a, b, threshold)
    scale = c.wiener_norm()
    Us, Vs = [], []
    hf = hankel_factors(a, b, drop_tol=0.1 * threshold * scale)
    if hf is not None:
        Us.append(-hf[0])
        Vs.append(hf[1])
    Ea, Eb = A.correction, B.correction
    if Eb.rank:
        Us.append(toeplitz_times(a, Eb.U))
        Vs.append(Eb.V)
    if Ea.rank:
        # E_A T(b) + E_A E_B = U_A (T(b)^* V_A + V_B (U_B^* V_A))^*
        Vn = toeplitz_times(b.conj_reflect(), Ea.V)
        if Eb.rank:
            q = min(Ea.rows_v, Eb.rows_u)
            M = Eb.U[:q].conj().T @ Ea.V[:q]
            rows = max(Vn.shape[0], Eb.rows_v)
            Vt = np.zeros((rows, Ea.rank), dtype=np.result_type(Vn, Eb.V, M))
            Vt[: Vn.shape[0]] += Vn
            Vt[: Eb.rows_v] += Eb.V @ M
            Vn = Vt
        Us.append(Ea.U)
        Vs.append(Vn)
    E = LowRankCorrection.from_blocks(Us, Vs)
    E = lr_compress(E, threshold, scale=scale)
    return QTMatrix(c, E)


def qt_add(A: QTMatrix, B: QTMatrix, alpha=1.0, beta=1.0, threshold=THRESHOLD):
    """``alpha A + beta B``.

    The correction is compressed relative to the size of the summands, so
    cancellation leaves no rounding-level residue.
    """
    c = sym_add(A.symbol, B.symbol, alpha, beta, threshold)
    Ea, Eb = A.correction.scale(alpha), B.correction.scale(beta)
    E = LowRankCorrection.from_blocks([Ea.U, Eb.U], [Ea.V, Eb.V])
    if Ea.rank and Eb.rank:
        scale = abs(alpha) * A.symbol.wiener_norm() + abs(beta) * B.symbol.wiener_norm()
        E = lr_compress(E, threshold, scale=max(scale, c.wiener_norm()))
    sa = A.self_adjoint and B.self_adjoint and np.isrealobj(alpha) and np.isrealobj(beta)
    return QTMatrix(c, E, self_adjoint=sa)


def qt_scale(A: QTMatrix, alpha):
    sa = A.self_adjoint and np.isrealobj(alpha)
    pd = A.positive_definite and np.isrealobj(alpha) and alpha > 0
    return QTMatrix(A.symbol.scale(alpha), A.correction.scale(alpha), self_adjoint=sa, positive_definite=pd)


def qt_adjoint(A: QTMatrix):
    """``A^* = T(conj a reflected) + E^*``."""
    return QTMatrix(
        A.symbol.conj_reflect(),
        A.correction.adjoint(),
        self_adjoint=A.self_adjoint,
        positive_definite=A.positive_definite,
    )


def qt_norm(A: QTMatrix):
    """``||A||_QT = ||a||_W + ||E||_2``, an upper bound of ``||A||_2``."""
    return A.symbol.wiener_norm() + A.correction.norm2()


def qt_norm_estimates(A: QTMatrix, m=None):
    """``qt``: :func:`qt_norm`; ``sup``: max of ``|a|`` on a grid; ``est2``:
    2-norm of the ``m x m`` truncation.

    ``est2`` comes from the extreme eigenvalues when ``A`` is self-adjoint and
    from the largest singular value otherwise.
    """
    out = {"qt": qt_norm(A), "sup": float(np.abs(A.symbol.grid_values(4096)).max())}
    if m is None:
        m = max(2 * (A.support + A.bandwidth), 64)
    M = A.truncate(m)
    if A.self_adjoint or A.is_self_adjoint():
        M = _herm(M)
        lo = sla.eigvalsh(M, subset_by_index=[0, 0])[0]
        hi = sla.eigvalsh(M, subset_by_index=[m - 1, m - 1])[0]
        out["est2"] = float(max(abs(lo), abs(hi)))
    else:
        out["est2"] = float(sla.svdvals(M)[0])
    return out


def qt_truncate(A: QTMatrix, m, n=None):
    """Dense leading ``m x n`` block with entries ``a_{j-i} + E_ij``."""
    if m < 1:
        raise ValueError("truncation size must be positive")
    n = m if n is None else n
    T = toeplitz_block(A.symbol, m, n)
    if A.correction.rank:
        T = T + A.correction.to_dense(m, n)
    return T
