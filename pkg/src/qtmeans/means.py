"""Geometric means of positive definite quasi-Toeplitz matrices.

The ALM, NBMP and weighted means share one recursive construction: each
iterate ``A_i`` is replaced by ``A_i #_{t_i} G'(others)``, where ``G'`` is the
mean of the remaining ``p - 1`` iterates of the same kind, and the recursion
bottoms out at the two-matrix weighted mean.  The exponent ``t_i`` and the
weights of ``G'`` depend on the kind:

========  ===============  =============================
kind      ``t_i``          sub-mean of the others
========  ===============  =============================
alm       1 (1/2 if p=2)   ALM
nbmp      (p-1)/p          NBMP
weighted  1 - w_i          weighted, ``w_j / (1 - w_i)``
========  ===============  =============================

The Karcher mean is computed by a fixed-point iteration on the Karcher
equation, started from the NBMP mean.
"""

import math
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg as sla

from .config import MAX_ITER, TOL
from .exceptions import NoConvergence, NotPositiveDefinite
from .funcalc import MAX_DENOMINATOR, IterationTrace, qt_exp, qt_log, qt_sharp, qt_sqrt
from .qt import QTMatrix

__all__ = [
    "KINDS",
    "MeanRequest",
    "MeanResult",
    "QTOps",
    "alm_mean",
    "nbmp_mean",
    "weighted_mean",
    "karcher_mean",
    "compute_mean",
    "mean_iterates",
    "predicted_symbol_values",
    "symbol_check",
    "scalar_alm_exponents",
    "scalar_alm_check",
    "thompson_distance",
]

KINDS = ("alm", "nbmp", "weighted", "karcher")
SYMBOL_GRID = 2048
#: relative change below which a non-decreasing outer sequence is treated as
#: having reached the rounding level
OUTER_STAGNATION = 1e-10


def _kind(kind):
    k = str(kind).lower()
    if k not in KINDS:
        raise ValueError(f"unknown mean kind {kind!r}; expected one of {KINDS}")
    return k


def _rational_weights(weights, p):
    w = np.asarray(weights, dtype=float)
    if w.shape != (p,):
        raise ValueError(f"expected {p} weights, got shape {w.shape}")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    if abs(w.sum() - 1.0) > 1e-15 * max(p, 2):
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    fr = [Fraction(x).limit_denominator(MAX_DENOMINATOR) for x in w[:-1]]
    fr.append(1 - sum(fr))
    if fr[-1] <= 0:
        raise ValueError("weights cannot be represented with the allowed denominators")
    return tuple(fr)


@dataclass
class MeanRequest:
    """Input of a mean computation.

    Parameters
    ----------
    matrices : list
        ``p >= 2`` self-adjoint positive definite matrices.
    kind : {'alm', 'nbmp', 'weighted', 'karcher'}
    weights : sequence of float, optional
        Probability vector; only for ``kind='weighted'``.  Each weight is
        replaced by a fraction with denominator at most 64.
    check : bool
        Run the positive-definiteness check on unflagged inputs.
    """

    matrices: list
    kind: str = "nbmp"
    weights: tuple = None
    tol: float = TOL
    max_iter: int = MAX_ITER
    check: bool = True

    def __post_init__(self):
        self.kind = _kind(self.kind)
        self.matrices = list(self.matrices)
        p = len(self.matrices)
        if p < 2:
            raise ValueError("a mean needs at least two matrices")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.kind == "weighted":
            if self.weights is None:
                raise ValueError("weighted mean requires weights")
            self.weights = _rational_weights(self.weights, p)
        elif self.weights is not None:
            raise ValueError(f"weights are only meaningful for the weighted mean, not {self.kind}")
        if self.check:
            self.matrices = [
                M if getattr(M, "positive_definite", True) else M.check_positive_definite()
                for M in self.matrices
            ]

    @property
    def p(self):
        return len(self.matrices)

    @property
    def float_weights(self):
        if self.weights is None:
            return np.full(self.p, 1.0 / self.p)
        return np.array([float(w) for w in self.weights])


@dataclass
class MeanResult:
    """Output of a mean computation.

    Attributes
    ----------
    mean : matrix
        The computed mean ``G``.
    trace : IterationTrace
        Outer iteration; residuals are the relative changes (or the Karcher
        residual).
    inner_iterations : int
        Total iterations of the nested sub-mean sequences.
    symbol_check : float
        Max over a 2048-point grid of ``|g(t) - g_pred(t)| / max g_pred``;
        ``nan`` for matrices without a symbol.
    first_step_spread : float or None
        NBMP only: max pairwise grid deviation of the iterate symbols after
        the first step, relative to ``max g_pred``.
    """

    mean: object
    kind: str
    trace: IterationTrace
    inner_iterations: int = 0
    symbol_check: float = math.nan
    first_step_spread: float = None
    seconds: float = 0.0
    dense_fallback: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return self.trace.iterations


class QTOps:
    """Operations used by the mean iterations, for QT and finite QT matrices."""

    def __init__(self, tol=TOL, max_iter=MAX_ITER):
        self.tol = tol
        self.max_iter = max_iter

    def roots(self, A, cache=None):
        key = id(A)
        if cache is not None and key in cache:
            return cache[key][1]
        r = qt_sqrt(A, self.tol, self.max_iter, check=False, with_inverse=True)
        if cache is not None:
            cache[key] = (A, r)  # keep A alive so the id stays unique
        return r

    def sharp(self, A, B, t, cache=None):
        if t == 0:
            return A
        if t == 1:
            return B
        return qt_sharp(A, B, t, self.tol, self.max_iter, roots=self.roots(A, cache), check=False)

    def norm(self, A):
        return A.norm()

    def rel_change(self, new, old):
        return (new - old).norm() / old.norm()

    def congruence(self, S, A):
        return (S @ (A @ S)).hermitian_part().with_flags(positive_definite=True)

    def log(self, A):
        return qt_log(A, self.tol, self.max_iter, check=False)

    def exp(self, A):
        return qt_exp(A, self.tol, self.max_iter)

    def add(self, A, B):
        return A + B

    def scale(self, A, c):
        return A * c


def _sub_spec(kind, weights, i, q):
    """Exponent for iterate ``i`` and weights of the sub-mean of the others."""
    if kind == "weighted":
        wi = weights[i]
        rest = tuple(w / (1 - wi) for j, w in enumerate(weights) if j != i)
        return _limit(1 - wi), rest
    if kind == "alm":
        return Fraction(1), None
    return Fraction(q - 1, q), None


def _limit(t):
    return t if t.denominator <= MAX_DENOMINATOR else t.limit_denominator(MAX_DENOMINATOR)


def _base_weight(kind, weights):
    return _limit(weights[1]) if kind == "weighted" else Fraction(1, 2)


class _Runner:
    def __init__(self, kind, ops, tol, max_iter, on_first_step=None):
        self.kind = kind
        self.ops = ops
        self.tol = tol
        self.max_iter = max_iter
        self.inner_iterations = 0
        self.on_first_step = on_first_step

    def mean(self, mats, weights, top=False, cache=None):
        """Mean of ``mats``; ``cache`` holds square roots of the given matrices."""
        q = len(mats)
        if q == 1:
            return mats[0], None
        if q == 2:
            return self.ops.sharp(mats[0], mats[1], _base_weight(self.kind, weights), cache), None
        ops = self.ops
        trace = IterationTrace(f"{self.kind}[{q}]", per_update=True)
        cur = list(mats)
        cache = {} if cache is None else cache
        while True:
            new = []
            for i in range(q):
                t, sub_w = _sub_spec(self.kind, weights, i, q)
                others = cur[:i] + cur[i + 1:]
                G, _ = self.mean(others, sub_w, cache=cache)
                new.append(ops.sharp(cur[i], G, t, cache))
            cache = {}
            r = max(ops.rel_change(n, c) for n, c in zip(new, cur))
            cur = new
            trace.record(r)
            if top and len(trace.residual_history) == 1 and self.on_first_step is not None:
                self.on_first_step(cur)
            if not top:
                self.inner_iterations += 1
            if r <= self.tol:
                trace.converged = True
                break
            h = trace.residual_history
            if len(h) >= 2 and r <= OUTER_STAGNATION and r >= h[-2]:
                trace.stagnated = True
                break
            if len(h) >= self.max_iter:
                raise NoConvergence(
                    f"{self.kind} mean: no convergence in {self.max_iter} iterations (change {r:.3e})",
                    trace,
                )
        return cur[0], trace

    def iterates(self, mats, weights, steps):
        """The top-level iterates after ``steps`` updates (no stopping test)."""
        q = len(mats)
        cur = list(mats)
        for _ in range(steps):
            cache = {}
            new = []
            for i in range(q):
                t, sub_w = _sub_spec(self.kind, weights, i, q)
                G, _ = self.mean(cur[:i] + cur[i + 1:], sub_w, cache=cache)
                new.append(self.ops.sharp(cur[i], G, t, cache))
            cur = new
        return cur


def _grid(m=SYMBOL_GRID):
    return 2 * np.pi * np.arange(m) / m


def _symbol_values(M, m=SYMBOL_GRID):
    # finite sections do not determine their symbol, so only semi-infinite inputs count
    if not isinstance(M, QTMatrix):
        return None
    return np.real(M.symbol.grid_values(m))


def predicted_symbol_values(matrices, weights=None, m=SYMBOL_GRID):
    """``prod_i a_i(t)^{w_i}`` on an ``m``-point grid (uniform weights by default)."""
    vals = [_symbol_values(M, m) for M in matrices]
    if any(v is None for v in vals):
        return None
    p = len(vals)
    w = np.full(p, 1.0 / p) if weights is None else np.asarray([float(x) for x in weights])
    logs = sum(wi * np.log(v) for wi, v in zip(w, vals))
    return np.exp(logs)


def symbol_check(G, matrices, weights=None, m=SYMBOL_GRID):
    """Relative max-grid deviation of the symbol of ``G`` from the predicted one."""
    pred = predicted_symbol_values(matrices, weights, m)
    g = _symbol_values(G, m)
    if pred is None or g is None:
        return math.nan
    return float(np.abs(g - pred).max() / np.abs(pred).max())


def _spread(mats, pred_max, m=SYMBOL_GRID):
    vals = [_symbol_values(M, m) for M in mats]
    if any(v is None for v in vals):
        return None
    s = max(np.abs(u - v).max() for i, u in enumerate(vals) for v in vals[i + 1:])
    return float(s / pred_max)


def _as_request(req, kind, **kw):
    if isinstance(req, MeanRequest):
        if req.kind != kind:
            raise ValueError(f"request kind {req.kind!r} does not match {kind!r}")
        return req
    return MeanRequest(list(req), kind=kind, **kw)


def _run_recursive(req, ops):
    ops = ops or QTOps(req.tol, req.max_iter)
    state = {}
    pred = predicted_symbol_values(req.matrices, req.weights)

    def first_step(iterates):
        if req.kind == "nbmp" and pred is not None:
            state["spread"] = _spread(iterates, np.abs(pred).max())

    t0 = time.perf_counter()
    runner = _Runner(req.kind, ops, req.tol, req.max_iter, first_step)
    if req.p == 2:
        G = runner.mean(req.matrices, req.weights)[0]
        trace = IterationTrace(f"{req.kind}[2]", [0.0], converged=True, per_update=True)
    else:
        G, trace = runner.mean(req.matrices, req.weights, top=True)
    seconds = time.perf_counter() - t0
    spread = state.get("spread")
    if spread is not None and spread > 100 * req.tol:
        warnings.warn(
            f"NBMP iterate symbols differ by {spread:.2e} after the first step", RuntimeWarning
        )
    return MeanResult(
        mean=G,
        kind=req.kind,
        trace=trace,
        inner_iterations=runner.inner_iterations,
        symbol_check=symbol_check(G, req.matrices, req.weights),
        first_step_spread=spread,
        seconds=seconds,
    )


def alm_mean(req, *, tol=TOL, max_iter=MAX_ITER, ops=None):
    """ALM mean; ``req`` is a :class:`MeanRequest` or a list of matrices."""
    return _run_recursive(_as_request(req, "alm", tol=tol, max_iter=max_iter), ops)


def nbmp_mean(req, *, tol=TOL, max_iter=MAX_ITER, ops=None):
    """NBMP mean; ``req`` is a :class:`MeanRequest` or a list of matrices."""
    return _run_recursive(_as_request(req, "nbmp", tol=tol, max_iter=max_iter), ops)


def weighted_mean(req, weights=None, *, tol=TOL, max_iter=MAX_ITER, ops=None):
    """Weighted mean with probability vector ``weights``."""
    if not isinstance(req, MeanRequest):
        req = MeanRequest(list(req), kind="weighted", weights=weights, tol=tol, max_iter=max_iter)
    return _run_recursive(_as_request(req, "weighted"), ops)


def karcher_mean(req, *, tol=TOL, max_iter=MAX_ITER, ops=None, x0=None):
    """Karcher mean by the fixed-point iteration

    ``X <- X^{1/2} exp(s/p sum_i log(X^{-1/2} A_i X^{-1/2})) X^{1/2}``

    started from the NBMP mean (or ``x0``).  The step ``s`` starts at 1 and
    is halved whenever the residual ``||sum_i log(...)||`` would increase.
    """
    req = _as_request(req, "karcher", tol=tol, max_iter=max_iter)
    ops = ops or QTOps(req.tol, req.max_iter)
    t0 = time.perf_counter()
    if x0 is None:
        warm = _run_recursive(MeanRequest(req.matrices, "nbmp", None, req.tol, req.max_iter, False), ops)
        X = warm.mean
    else:
        X = x0
    p = req.p

    def residual(X):
        Xh, Xih = ops.roots(X)
        S = None
        for A in req.matrices:
            L = ops.log(ops.congruence(Xih, A))
            S = L if S is None else ops.add(S, L)
        return Xh, S, ops.norm(S)

    trace = IterationTrace("karcher")
    Xh, S, R = residual(X)
    trace.record(R)
    step = 1.0
    while R > req.tol:
        if trace.iterations >= req.max_iter:
            raise NoConvergence(f"karcher mean: residual {R:.3e} after {req.max_iter} iterations", trace)
        Xn = ops.congruence(Xh, ops.exp(ops.scale(S, step / p)))
        Xhn, Sn, Rn = residual(Xn)
        if Rn < R:
            X, Xh, S, R = Xn, Xhn, Sn, Rn
            trace.record(R)
            continue
        step /= 2
        if R <= OUTER_STAGNATION or step < 1.0 / 64:
            trace.stagnated = True
            break
    trace.converged = R <= req.tol
    seconds = time.perf_counter() - t0
    return MeanResult(
        mean=X,
        kind="karcher",
        trace=trace,
        symbol_check=symbol_check(X, req.matrices),
        seconds=seconds,
        extra={"residual": R, "step": step},
    )


_DISPATCH = {"alm": alm_mean, "nbmp": nbmp_mean, "karcher": karcher_mean}


def compute_mean(req, ops=None):
    """Dispatch a :class:`MeanRequest` on its kind."""
    if req.kind == "weighted":
        return weighted_mean(req, ops=ops)
    return _DISPATCH[req.kind](req, ops=ops)


def mean_iterates(req, steps=1, ops=None):
    """Top-level iterates ``A_i^{(steps)}`` of an ALM/NBMP/weighted request."""
    if req.kind == "karcher":
        raise ValueError("the Karcher iteration has a single iterate")
    ops = ops or QTOps(req.tol, req.max_iter)
    return _Runner(req.kind, ops, req.tol, req.max_iter).iterates(req.matrices, req.weights, steps)


def scalar_alm_exponents(p, k):
    """Exact exponent ``n_k = (1 + (-1)^{k+1} / (p-1)^k) / p`` of the scalar ALM sequence.

    The ``k``-th iterate is ``a_i^{n_{k-1}} prod_{j != i} a_j^{n_k}``;
    ``n_{-1} = 1`` and ``n_0 = 0``.
    """
    p, k = int(p), int(k)
    if p < 2:
        raise ValueError("p must be at least 2")
    if k < -1:
        raise ValueError("k must be at least -1")
    return Fraction(1, p) * (1 + Fraction((-1) ** (k + 1), (p - 1) ** k))


def scalar_alm_check(p, k_max, values=None, seed=0):
    """Max relative gap between direct scalar ALM iterates and the closed form.

    The direct iteration replaces each ``a_i`` by the geometric mean of the
    others, which is the ALM recursion on positive scalars.
    """
    if values is None:
        values = np.random.default_rng(seed).uniform(0.5, 20.0, p)
    a0 = np.asarray(values, dtype=float)
    a = a0.copy()
    worst = 0.0
    for k in range(1, k_max + 1):
        a = np.array([np.prod(np.delete(a, i)) ** (1.0 / (p - 1)) for i in range(p)])
        n_prev = float(scalar_alm_exponents(p, k - 1))
        n_k = float(scalar_alm_exponents(p, k))
        closed = np.array([a0[i] ** n_prev * np.prod(np.delete(a0, i) ** n_k) for i in range(p)])
        worst = max(worst, float(np.abs(a - closed).max() / np.abs(closed).max()))
    return worst


def thompson_distance(A, B, m=None):
    """Thompson distance ``log max(rho(A^{-1} B), rho(B^{-1} A))`` of ``m x m`` truncations.

    An estimate of the operator distance; dense inputs are used as given.
    """
    if isinstance(A, np.ndarray):
        Am, Bm = A, B
    else:
        if m is None:
            m = max(2 * max(A.support + A.bandwidth, B.support + B.bandwidth), 64)
        Am, Bm = A.truncate(m), B.truncate(m)
    Am = 0.5 * (Am + Am.conj().T)
    Bm = 0.5 * (Bm + Bm.conj().T)
    try:
        lam = sla.eigh(Bm, Am, eigvals_only=True)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("truncation is not positive definite") from None
    if lam[0] <= 0:
        raise NotPositiveDefinite("truncation is not positive definite")
    return float(max(math.log(lam[-1]), -math.log(lam[0])))
