"""Functions of self-adjoint positive definite quasi-Toeplitz matrices.

Every routine is written against a small ring interface (``@``, ``+``, ``-``,
scalar ``*`` and ``/``, ``identity_like``, ``norm``, ``hermitian_part``,
``spectral_bounds``, ``check_positive_definite``) so it applies unchanged to
:class:`~qtmeans.qt.QTMatrix` and :class:`~qtmeans.finite.FiniteQT`.
"""

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import MAX_ITER, TOL
from .exceptions import NoConvergence

__all__ = [
    "IterationTrace",
    "as_rational",
    "qt_inv",
    "qt_sqrt",
    "qt_proot",
    "qt_pow_rational",
    "qt_log",
    "qt_exp",
    "qt_sharp",
    "MAX_DENOMINATOR",
    "scalar_cr_sequence",
    "scalar_proot_sequence",
]

#: largest denominator used when approximating a real exponent by a fraction
MAX_DENOMINATOR = 64
#: residual level below which a quadratically convergent iteration that stops
#: improving is considered to have hit rounding noise
STAGNATION_FLOOR = 1e-8
LOG_THRESHOLD = 0.3
EXP_THRESHOLD = 0.5
SERIES_DEGREE = 16


@dataclass
class IterationTrace:
    """Residual history of one iteration.

    ``converged`` means the last residual met the tolerance.  ``stagnated``
    means the iteration stopped early because the residual settled at the
    rounding level above the tolerance.
    """

    name: str = ""
    residual_history: list = field(default_factory=list)
    converged: bool = False
    stagnated: bool = False
    #: residual k belongs to update k + 1 rather than to iterate k
    per_update: bool = False

    @property
    def iterations(self):
        n = len(self.residual_history)
        return n if self.per_update else max(n - 1, 0)

    @property
    def residual(self):
        return self.residual_history[-1] if self.residual_history else math.nan

    def record(self, r):
        self.residual_history.append(float(r))

    def to_csv(self, target=None):
        """Write ``iter,residual`` rows to a path or file object; return the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "residual"])
        start = 1 if self.per_update else 0
        for k, r in enumerate(self.residual_history, start):
            w.writerow([k, repr(r)])
        text = buf.getvalue()
        if target is not None:
            if hasattr(target, "write"):
                target.write(text)
            else:
                with open(target, "w", newline="") as fh:
                    fh.write(text)
        return text


def _stop(trace, tol, max_iter, floor=STAGNATION_FLOOR):
    h = trace.residual_history
    r = h[-1]
    if not np.isfinite(r):
        raise NoConvergence(f"{trace.name}: residual is not finite", trace)
    if r <= tol:
        trace.converged = True
        return True
    if len(h) >= 2 and r <= floor and r > 0.5 * h[-2]:
        trace.stagnated = True
        return True
    if len(h) > max_iter:
        raise NoConvergence(
            f"{trace.name}: no convergence in {max_iter} iterations (residual {r:.3e})", trace
        )
    return False


def _require_pd(A, check):
    if not check or A.positive_definite:
        return A
    return A.check_positive_definite()


def _finish(X, like, trace, full_output):
    if like.self_adjoint:
        X = X.hermitian_part()
    if like.positive_definite:
        X = X.with_flags(self_adjoint=True, positive_definite=True)
    return (X, trace) if full_output else X


def _power(X, n):
    """``X^n`` for an integer ``n >= 1`` by repeated squaring."""
    result = None
    while True:
        if n & 1:
            result = X if result is None else result @ X
        n >>= 1
        if not n:
            return result
        X = X @ X


def as_rational(t, max_denominator=MAX_DENOMINATOR):
    """Best fraction with denominator at most ``max_denominator``."""
    if isinstance(t, Fraction):
        return t
    if isinstance(t, tuple):
        return Fraction(*t)
    return Fraction(t).limit_denominator(max_denominator)


def qt_inv(A, tol=TOL, max_iter=MAX_ITER, *, x0=None, bounds=None, check=True, full_output=False):
    """Inverse by the Newton-Schulz iteration ``X <- X (2I - A X)``.

    Parameters
    ----------
    A : QTMatrix or FiniteQT
        Self-adjoint positive definite.
    tol : float
        Stop once ``||I - A X||_QT <= tol``.
    x0 : optional
        Warm start, used when ``||I - A x0||_QT < 1``; otherwise the iteration
        starts from ``2 / (alpha + beta) I``.
    bounds : (alpha, beta), optional
        Spectral bounds; estimated by ``A.spectral_bounds()`` when omitted.
    """
    A = _require_pd(A, check)
    I = A.identity_like()
    trace = IterationTrace("inv")
    X = R = None
    if x0 is not None:
        R = I - A @ x0
        if R.norm() < 0.9:
            X = x0
    if X is None:
        alpha, beta = A.spectral_bounds() if bounds is None else bounds
        X = I * (2.0 / (max(alpha, 0.0) + beta))
        R = I - A @ X
    while True:
        trace.record(R.norm())
        if _stop(trace, tol, max_iter):
            break
        X = X @ (I + R)
        R = I - A @ X
    return _finish(X, A, trace, full_output)


def qt_sqrt(A, tol=TOL, max_iter=MAX_ITER, *, check=True, with_inverse=False, full_output=False):
    """Principal square root by cyclic reduction.

    With ``A`` scaled by ``beta = ||A||_QT`` the iteration
    ``Y <- -Y W^{-1} Y``, ``W <- W + 2 Y`` from ``Y = I - A``, ``W = 2 (I + A)``
    drives ``W / 4`` to ``A^{1/2}``; it stops when ``||Y||_QT <= tol``.

    Returns ``S`` or, with ``with_inverse``, the pair ``(S, S^{-1})``; the
    inverse reuses the last ``W^{-1}`` as a warm start.
    """
    A = _require_pd(A, check)
    alpha, beta = A.spectral_bounds()
    I = A.identity_like()
    As = A / beta
    Y = I - As
    W = (I + As) * 2.0
    w_lo = 4.0 * math.sqrt(max(alpha / beta, 0.0))
    Winv = None
    trace = IterationTrace("sqrt")
    while True:
        trace.record(Y.norm())
        if _stop(trace, tol, max_iter):
            break
        Winv = qt_inv(W, tol, max_iter, x0=Winv, bounds=(w_lo, W.norm()), check=False)
        Y = -(Y @ (Winv @ Y))
        W = W + Y * 2.0
    S = _finish(W * (math.sqrt(beta) / 4.0), A, trace, False)
    if not with_inverse:
        return (S, trace) if full_output else S
    x0 = None if Winv is None else Winv * (4.0 / math.sqrt(beta))
    Sinv = qt_inv(S, tol, max_iter, x0=x0, bounds=(math.sqrt(max(alpha, 0.0)), S.norm()), check=False)
    Sinv = _finish(Sinv, A, trace, False)
    return ((S, Sinv), trace) if full_output else (S, Sinv)


def qt_proot(A, p, tol=TOL, max_iter=MAX_ITER, *, check=True, full_output=False):
    """Principal ``p``-th root by the coupled Newton iteration.

    On ``M = A / beta``: ``N = ((p-1) I + M) / p``, ``Y <- Y N``,
    ``M <- N^{-p} M`` from ``Y = I``; stops when ``||M - I||_QT <= tol`` and
    returns ``beta^{1/p} Y``.
    """
    p = int(p)
    if p < 1:
        raise ValueError("root order must be a positive integer")
    A = _require_pd(A, check)
    if p == 1:
        return (A, IterationTrace("proot", [0.0], True)) if full_output else A
    _, beta = A.spectral_bounds()
    I = A.identity_like()
    M = A / beta
    Y = I
    Ninv = None
    trace = IterationTrace("proot")
    while True:
        D = M - I
        trace.record(D.norm())
        if _stop(trace, tol, max_iter):
            break
        N = I + D / p
        Ninv = qt_inv(N, tol, max_iter, x0=Ninv, bounds=((p - 1) / p, N.norm()), check=False)
        Y = Y @ N
        M = _power(Ninv, p) @ M
        if A.self_adjoint:
            M = M.hermitian_part()
    return _finish(Y * beta ** (1.0 / p), A, trace, full_output)


def qt_pow_rational(A, num, den=1, tol=TOL, max_iter=MAX_ITER, *, check=True):
    """``A^{num/den}`` for ``0 <= num/den <= 1`` as ``(A^{1/den})^num``."""
    t = Fraction(int(num), int(den))
    if not 0 <= t <= 1:
        raise ValueError(f"exponent {t} outside [0, 1]")
    A = _require_pd(A, check)
    if t == 0:
        return A.identity_like()
    if t == 1:
        return A
    if t.denominator == 2:
        R = qt_sqrt(A, tol, max_iter, check=False)
    else:
        R = qt_proot(A, t.denominator, tol, max_iter, check=False)
    if t.numerator == 1:
        return R
    return _finish(_power(R, t.numerator), A, None, False)


def qt_log(A, tol=TOL, max_iter=MAX_ITER, *, check=True, full_output=False):
    """Logarithm by inverse scaling and squaring.

    After a scalar normalization, square roots are taken until
    ``||X - I||_QT <= 0.3``; ``log X`` then comes from the odd series
    ``2 sum_j Y^j / j`` in ``Y = (X - I)(X + I)^{-1}`` through degree 15.
    """
    A = _require_pd(A, check)
    I = A.identity_like()
    alpha, beta = A.spectral_bounds()
    c = math.sqrt(max(alpha, 1e-300 * beta) * beta)
    X = A / c
    s = 0
    trace = IterationTrace("log")
    Z = X - I
    trace.record(Z.norm())
    while trace.residual > LOG_THRESHOLD:
        if s >= 64:
            raise NoConvergence("log: too many square roots", trace)
        X = qt_sqrt(X, tol, max_iter, check=False)
        s += 1
        Z = X - I
        trace.record(Z.norm())
    trace.converged = True
    zn = trace.residual
    Y = Z @ qt_inv(X + I, tol, max_iter, bounds=(2.0 - zn, 2.0 + zn), check=False)
    Y2 = Y @ Y
    L = Y
    P = Y
    for j in range(3, SERIES_DEGREE, 2):
        P = P @ Y2
        L = L + P / j
    L = L * (2.0 * 2**s)
    if c != 1.0:
        L = L + I * math.log(c)
    if A.self_adjoint:
        L = L.hermitian_part()
    return (L, trace) if full_output else L


def qt_exp(A, tol=TOL, max_iter=MAX_ITER, *, full_output=False):
    """Exponential by scaling and squaring with a degree-16 Taylor polynomial.

    The constant coefficient of the symbol is split off as a scalar factor;
    the remainder is scaled by ``2^{-s}`` so that its QT-norm is at most 0.5.
    """
    I = A.identity_like()
    mu = float(np.real(A.symbol.coeff(0)))
    X = A - I * mu
    n = X.norm()
    s = max(0, math.ceil(math.log2(n / EXP_THRESHOLD))) if n > 0 else 0
    X = X / 2**s
    E = I
    for j in range(SERIES_DEGREE, 0, -1):
        E = I + (X @ E) / j
    for _ in range(s):
        E = E @ E
    E = E * math.exp(mu)
    trace = IterationTrace("exp", [n], True)
    if A.self_adjoint:
        E = E.hermitian_part().with_flags(self_adjoint=True, positive_definite=True)
    return (E, trace) if full_output else E


def qt_sharp(A, B, t, tol=TOL, max_iter=MAX_ITER, *, roots=None, check=True):
    """Weighted geometric mean ``A #_t B = A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}``.

    Parameters
    ----------
    t : Fraction, float or (num, den)
        Weight in ``[0, 1]``; floats are replaced by the closest fraction
        with denominator at most :data:`MAX_DENOMINATOR`.
    roots : (A^{1/2}, A^{-1/2}), optional
        Precomputed square root of ``A`` and its inverse.
    """
    t = as_rational(t)
    if not 0 <= t <= 1:
        raise ValueError(f"weight {t} outside [0, 1]")
    A = _require_pd(A, check)
    B = _require_pd(B, check)
    if t == 0:
        return A
    if t == 1:
        return B
    if roots is None:
        roots = qt_sqrt(A, tol, max_iter, check=False, with_inverse=True)
    Ah, Aih = roots
    C = (Aih @ (B @ Aih)).hermitian_part().with_flags(positive_definite=True)
    Ct = qt_pow_rational(C, t.numerator, t.denominator, tol, max_iter, check=False)
    G = (Ah @ (Ct @ Ah)).hermitian_part()
    return G.with_flags(self_adjoint=True, positive_definite=True)


def scalar_cr_sequence(x, steps):
    """Scalar cyclic reduction ``w_k / 4`` for each ``x`` in ``(0, 1]``.

    Returns an array of shape ``(steps + 1,) + x.shape``; row ``k`` holds the
    ``k``-th approximation of ``sqrt(x)``.
    """
    x = np.asarray(x, dtype=float)
    y, w = 1.0 - x, 2.0 * (1.0 + x)
    out = [w / 4.0]
    for _ in range(steps):
        y = -y * y / w
        w = w + 2.0 * y
        out.append(w / 4.0)
    return np.array(out)


def scalar_proot_sequence(x, p, steps):
    """Scalar coupled Newton iteration for ``x^{1/p}``.

    Returns ``(m, y)``, arrays of shape ``(steps + 1,) + x.shape`` with
    ``m_k -> 1`` and ``y_k -> x^{1/p}``.

    Once ``m >= 1/2`` the update runs on ``d = 1 - m`` (computed exactly):
    with ``u = d/p``, ``d' = ((1 - u)^p - 1 + p u) / (1 - u)^p`` has an
    alternating numerator with shrinking terms, so it is evaluated without
    cancellation.  Rounding then can neither push ``m`` above one nor
    reverse the direction of either sequence.
    """
    x = np.asarray(x, dtype=float)
    p = int(p)
    # sum_{j>=2} C(p, j) (-u)^j = u^2 * poly(u), coefficients from the top degree down
    coef = [math.comb(p, j) * (-1) ** j for j in range(p, 1, -1)]
    m, y = x.copy(), np.ones_like(x)
    ms, ys = [m], [y]
    for _ in range(steps):
        d = 1.0 - m
        u = d / p
        n = 1.0 - u
        npow = n**p
        poly = np.zeros_like(d)
        for c in coef:
            poly = poly * u + c
        m = np.where(m < 0.5, m / npow, 1.0 - poly * u * u / npow)
        y = y * n
        ms.append(m)
        ys.append(y)
    return np.array(ms), np.array(ys)
