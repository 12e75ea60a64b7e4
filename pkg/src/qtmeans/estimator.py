"""scikit-learn style wrapper around the mean computations."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import MAX_ITER, TOL
from .finite import DenseOps, FiniteQT
from .means import KINDS, MeanRequest, QTOps, compute_mean, thompson_distance
from .qt import QTMatrix

__all__ = ["GeometricMean", "check_matrix_list"]


def check_matrix_list(X, min_count=1):
    """Validate a collection of positive definite matrices.

    Accepts a sequence of :class:`QTMatrix`, a sequence of :class:`FiniteQT`,
    or dense input (a 3-d array or a sequence of square 2-d arrays).

    Returns
    -------
    mats : list
    dense : bool
        Whether the matrices are dense arrays.
    """
    if isinstance(X, (QTMatrix, FiniteQT)):
        X = [X]
    if isinstance(X, np.ndarray) and X.ndim == 2:
        X = X[None]
    mats = list(X)
    if len(mats) < min_count:
        raise ValueError(f"expected at least {min_count} matrices, got {len(mats)}")
    if all(isinstance(M, (QTMatrix, FiniteQT)) for M in mats):
        if len({type(M) for M in mats}) != 1:
            raise TypeError("cannot mix QTMatrix and FiniteQT inputs")
        if isinstance(mats[0], FiniteQT) and len({M.m for M in mats}) != 1:
            raise ValueError("finite matrices must share one size")
        return mats, False
    if any(isinstance(M, (QTMatrix, FiniteQT)) for M in mats):
        raise TypeError("cannot mix structured and dense inputs")
    dense = []
    for M in mats:
        M = np.asarray(M)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("dense inputs must be square matrices")
        if not np.all(np.isfinite(M)):
            raise ValueError("dense inputs contain NaN or infinity")
        dense.append(M.astype(np.result_type(M.dtype, np.float64)))
    if len({M.shape for M in dense}) != 1:
        raise ValueError("dense matrices must share one shape")
    return dense, True


class GeometricMean(TransformerMixin, BaseEstimator):
    """Geometric mean of positive definite matrices.

    ``fit`` computes the mean of the given matrices; ``transform`` returns
    the Thompson distance of each input matrix to it.

    Parameters
    ----------
    kind : {'nbmp', 'alm', 'weighted', 'karcher'}
    weights : sequence of float, optional
        Probability vector for ``kind='weighted'``.
    tol : float
    max_iter : int
    truncation : int, optional
        Truncation size of the Thompson distance estimate for QT matrices.

    Attributes
    ----------
    mean_ : QTMatrix, FiniteQT or ndarray
    n_iter_ : int
    symbol_check_ : float
        Grid deviation of the mean's symbol from the predicted symbol
        (``nan`` for dense input).
    result_ : MeanResult
    """

    def __init__(self, kind="nbmp", weights=None, tol=TOL, max_iter=MAX_ITER, truncation=None):
        self.kind = kind
        self.weights = weights
        self.tol = tol
        self.max_iter = max_iter
        self.truncation = truncation

    def fit(self, X, y=None):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        mats, dense = check_matrix_list(X, min_count=2)
        ops = DenseOps(self.tol, self.max_iter) if dense else QTOps(self.tol, self.max_iter)
        req = MeanRequest(mats, kind=self.kind, weights=self.weights, tol=self.tol,
                          max_iter=self.max_iter, check=not dense)
        res = compute_mean(req, ops=ops)
        self.result_ = res
        self.mean_ = res.mean
        self.n_iter_ = res.iterations
        self.symbol_check_ = res.symbol_check
        self.dense_ = dense
        return self

    def transform(self, X):
        """Thompson distance of each matrix to the fitted mean, shape ``(n, 1)``."""
        check_is_fitted(self, "mean_")
        mats, dense = check_matrix_list(X)
        if dense != self.dense_:
            raise TypeError("transform input must have the same representation as the fit input")
        G = self.mean_
        out = np.empty((len(mats), 1))
        for i, M in enumerate(mats):
            if isinstance(M, FiniteQT):
                out[i, 0] = thompson_distance(M.to_dense(), G.to_dense())
            else:
                out[i, 0] = thompson_distance(M, G, self.truncation)
        return out
