"""Low-rank compact corrections ``E = U V^H`` with finite row support."""

import numpy as np
import scipy.linalg as sla
from scipy.signal import fftconvolve

from .config import THRESHOLD
from .symbol import Symbol

__all__ = [
    "LowRankCorrection",
    "hankel_correction",
    "hankel_factors",
    "lr_add",
    "lr_compress",
    "lr_norm2",
    "toeplitz_times",
]

# switch from a dense Toeplitz block to FFT convolution above this many entries
_DENSE_TOEPLITZ_LIMIT = 250_000


def _pad_rows(X, rows):
    if X.shape[0] == rows:
        return X
    out = np.zeros((rows, X.shape[1]), dtype=X.dtype)
    out[: X.shape[0]] = X
    return out


class LowRankCorrection:
    """Correction ``E`` with ``E[i, j] = (U V^H)[i, j]`` for ``i < rows_u``, ``j < rows_v``.

    All other entries of the semi-infinite matrix are zero.
    """

    __slots__ = ("_U", "_V", "_norm")

    def __init__(self, U, V, norm=None):
        U = np.atleast_2d(np.asarray(U))
        V = np.atleast_2d(np.asarray(V))
        if U.shape[1] != V.shape[1]:
            raise ValueError(f"factor ranks differ: {U.shape[1]} vs {V.shape[1]}")
        dtype = np.result_type(U.dtype, V.dtype, np.float64)
        U = np.array(U, dtype=dtype)
        V = np.array(V, dtype=dtype)
        U.flags.writeable = False
        V.flags.writeable = False
        self._U, self._V = U, V
        self._norm = norm  # cached spectral norm, when known

    @classmethod
    def zero(cls):
        return cls(np.zeros((0, 0)), np.zeros((0, 0)))

    @classmethod
    def from_dense(cls, block, eps=THRESHOLD):
        """Factor a finite block (top-left corner of ``E``) by truncated SVD."""
        block = np.atleast_2d(np.asarray(block))
        if not np.any(block):
            return cls.zero()
        W, s, Zh = np.linalg.svd(block, full_matrices=False)
        return cls(W * s, Zh.conj().T).compress(eps)

    @classmethod
    def from_blocks(cls, Us, Vs):
        """Sum of several factored terms ``sum_l U_l V_l^H``."""
        pairs = [(U, V) for U, V in zip(Us, Vs) if U.shape[1] and U.shape[0] and V.shape[0]]
        if not pairs:
            return cls.zero()
        ru = max(U.shape[0] for U, _ in pairs)
        rv = max(V.shape[0] for _, V in pairs)
        U = np.hstack([_pad_rows(U, ru) for U, _ in pairs])
        V = np.hstack([_pad_rows(V, rv) for _, V in pairs])
        return cls(U, V)

    @property
    def U(self):
        return self._U

    @property
    def V(self):
        return self._V

    @property
    def rows_u(self):
        return self._U.shape[0] if self.rank else 0

    @property
    def rows_v(self):
        return self._V.shape[0] if self.rank else 0

    @property
    def rank(self):
        return self._U.shape[1]

    @property
    def support(self):
        """Size of the smallest leading block containing every nonzero entry."""
        return max(self.rows_u, self.rows_v)

    @property
    def dtype(self):
        return self._U.dtype

    def is_zero(self):
        return self.rank == 0

    def to_dense(self, rows=None, cols=None):
        """Leading ``rows x cols`` block (default: the support)."""
        rows = self.rows_u if rows is None else rows
        cols = self.rows_v if cols is None else cols
        out = np.zeros((rows, cols), dtype=self.dtype)
        if self.rank:
            r, c = min(rows, self.rows_u), min(cols, self.rows_v)
            out[:r, :c] = self._U[:r] @ self._V[:c].conj().T
        return out

    def adjoint(self):
        return LowRankCorrection(self._V, self._U, self._norm)

    def scale(self, alpha):
        if alpha == 0 or not self.rank:
            return LowRankCorrection.zero()
        norm = None if self._norm is None else abs(alpha) * self._norm
        return LowRankCorrection(alpha * self._U, self._V, norm)

    def __neg__(self):
        return self.scale(-1.0)

    def __add__(self, other):
        return lr_add(self, other)

    def __sub__(self, other):
        return lr_add(self, -other)

    def compress(self, eps=THRESHOLD, scale=None):
        return lr_compress(self, eps, scale)

    def norm2(self):
        return lr_norm2(self)

    def singular_values(self):
        if not self.rank:
            return np.zeros(0)
        _, Ru = np.linalg.qr(self._U)
        _, Rv = np.linalg.qr(self._V)
        return np.linalg.svd(Ru @ Rv.conj().T, compute_uv=False)

    def __repr__(self):
        return f"LowRankCorrection(rows_u={self.rows_u}, rows_v={self.rows_v}, rank={self.rank})"


def _householder(X):
    """Raw Householder QR: reflectors, scalar factors and the triangular factor."""
    (h, tau), _ = sla.qr(X, mode="raw", check_finite=False)
    k = tau.size
    return h[:, :k], tau, np.triu(h[:k])


def _apply_q(h, tau, C):
    """``Q @ C`` for the ``Q`` of :func:`_householder` and ``C`` with ``k`` rows."""
    out = np.zeros((h.shape[0], C.shape[1]), dtype=np.result_type(h, C))
    out[: C.shape[0]] = C
    name = "unmqr" if np.iscomplexobj(out) else "ormqr"
    (mqr,) = sla.get_lapack_funcs((name,), (h.astype(out.dtype, copy=False), out))
    h = h.astype(out.dtype, copy=False)
    work = mqr("L", "N", h, tau.astype(out.dtype, copy=False), out, lwork=-1)[1]
    cq, _, info = mqr("L", "N", h, tau.astype(out.dtype, copy=False), out,
                      lwork=max(int(work[0].real), 1), overwrite_c=1)
    if info != 0:
        raise np.linalg.LinAlgError(f"{name} failed with info={info}")
    return cq


def lr_compress(E, eps=THRESHOLD, scale=None):
    """Lowest-rank ``F`` with ``||E - F||_2 <= eps * max(sigma_max(E), scale)``.

    Householder factorizations of both factors reduce the problem to an SVD
    of the small core ``R_U R_V^H``.  Trailing rows of either factor whose
    contribution to ``E`` falls below the same threshold are dropped.
    """
    if not E.rank:
        return E
    hu, tu, Ru = _householder(E.U)
    hv, tv, Rv = _householder(E.V)
    W, s, Zh = _svd(Ru @ Rv.conj().T)
    if s.size == 0 or s[0] == 0.0:
        return LowRankCorrection.zero()
    ref = s[0] if scale is None else max(s[0], scale)
    cut = eps * ref
    r = int(np.count_nonzero(s > cut))
    if r == 0:
        return LowRankCorrection.zero()
    U = _apply_q(hu, tu, W[:, :r] * s[:r])
    V = _apply_q(hv, tv, Zh[:r].conj().T)
    # row norms of E and of E^H: rows of U, and rows of V scaled by s
    ru = _last_row_above(np.linalg.norm(U, axis=1), cut)
    rv = _last_row_above(np.linalg.norm(V * s[:r], axis=1), cut)
    if ru == U.shape[0] and rv == V.shape[0]:
        return LowRankCorrection(U, V, float(s[0]))
    return LowRankCorrection(U[:ru], V[:rv])


def _svd(C):
    try:
        return sla.svd(C, full_matrices=False, check_finite=False)
    except np.linalg.LinAlgError:
        # divide and conquer occasionally fails on clustered spectra
        return sla.svd(C, full_matrices=False, lapack_driver="gesvd")


def _last_row_above(norms, cut):
    big = np.flatnonzero(norms >= cut)
    return int(big[-1]) + 1 if big.size else 1


def lr_add(E, F, eps=THRESHOLD, scale=None):
    """``E + F`` by factor concatenation followed by compression.

    The truncation is relative to ``||E|| + ||F||`` unless ``scale`` is given,
    so exact cancellation yields rank zero.
    """
    if not F.rank:
        return E
    if not E.rank:
        return F
    if scale is None:
        scale = lr_norm2(E) + lr_norm2(F)
    return LowRankCorrection.from_blocks([E.U, F.U], [E.V, F.V]).compress(eps, scale)


def lr_norm2(E):
    """Spectral norm of ``E``."""
    if E._norm is not None:
        return E._norm
    s = E.singular_values()
    return float(s[0]) if s.size else 0.0


def _tail_norms(c):
    """``||c[k:]||_2`` for every ``k``."""
    return np.sqrt(np.cumsum((np.abs(c) ** 2)[::-1])[::-1])


def hankel_factors(a: Symbol, b: Symbol, drop_tol=0.0):
    """Uncompressed factors ``(U, V)`` with ``U V^H = H(a^-) H(b^+)``.

    ``H(a^-)[i, j] = a_{-(i+j+1)}`` and ``H(b^+)[i, j] = b_{i+j+1}`` (0-based).
    Column ``k`` of ``U`` is a tail of ``a^-`` and row ``k`` of ``V^H`` a tail
    of ``b^+``; trailing terms are dropped while the sum of the norm products
    of the dropped terms stays below ``drop_tol``.  Returns ``None`` when the
    product vanishes.
    """
    am, bp = a.negative_part(), b.positive_part()
    if not am.size or not bp.size or not np.any(am) or not np.any(bp):
        return None
    q = min(am.size, bp.size)
    if drop_tol > 0:
        w = _tail_norms(am)[:q] * _tail_norms(bp)[:q]
        tail = np.cumsum(w[::-1])[::-1]  # tail[k] = sum_{j >= k} w[j]
        q = max(int(np.count_nonzero(tail > drop_tol)), 1)
    dtype = np.result_type(am.dtype, bp.dtype)
    am_pad = np.concatenate([am, np.zeros(q, dtype=dtype)])
    bp_pad = np.concatenate([bp, np.zeros(q, dtype=dtype)])
    U = am_pad[np.add.outer(np.arange(am.size), np.arange(q))]
    Hb = bp_pad[np.add.outer(np.arange(q), np.arange(bp.size))]
    return U, Hb.conj().T


def hankel_correction(a: Symbol, b: Symbol, eps=THRESHOLD, scale=None):
    """``H(a^-) H(b^+)`` as a compressed :class:`LowRankCorrection`.

    The sign is positive; ``T(a) T(b) = T(ab) - H(a^-) H(b^+)``.
    """
    f = hankel_factors(a, b)
    if f is None:
        return LowRankCorrection.zero()
    return LowRankCorrection(*f).compress(eps, scale)


def toeplitz_times(a: Symbol, X):
    """``T(a) X`` for a block ``X`` occupying the first rows; returns the nonzero rows."""
    r = X.shape[0]
    R = r - a.lo
    dtype = np.result_type(a.dtype, X.dtype)
    if R <= 0 or r == 0 or a.is_zero():
        return np.zeros((0, X.shape[1]), dtype=dtype)
    if R * r <= _DENSE_TOEPLITZ_LIMIT:
        w = a.window(-(R - 1), r - 1)  # a_{j-i} = w[j - i + R - 1]
        idx = np.subtract.outer(np.arange(r), np.arange(R)) + (R - 1)  # [j, i]
        return w[idx.T] @ X
    # (T(a) X)_i = sum_j a_{j-i} X_j = (rev(a) * X)_i with rev(a) starting at index -hi
    conv = fftconvolve(a.coeffs[::-1][:, None], X, axes=0)
    start = a.hi
    out = np.zeros((R, X.shape[1]), dtype=conv.dtype)
    src_lo, src_hi = max(start, 0), min(start + R, conv.shape[0])
    if src_lo < src_hi:
        out[src_lo - start:src_hi - start] = conv[src_lo:src_hi]
    if not np.issubdtype(dtype, np.complexfloating):
        out = out.real
    return out
