"""Arithmetic, matrix functions and geometric means of quasi-Toeplitz matrices."""

__version__ = "0.1.0"

from .config import EPS, MAX_ITER, THRESHOLD, TOL, ToleranceConfig
from .correction import LowRankCorrection, hankel_correction, lr_add, lr_compress, lr_norm2
from .estimator import GeometricMean, check_matrix_list
from .exceptions import (
    DomainError,
    NoConvergence,
    NonPositiveSymbol,
    NotPositiveDefinite,
    QTError,
    SupportOverflow,
)
from .finite import FiniteQT, dense_oracle_mean, fin_mean, fin_mul
from .funcalc import (
    IterationTrace,
    qt_exp,
    qt_inv,
    qt_log,
    qt_pow_rational,
    qt_proot,
    qt_sharp,
    qt_sqrt,
)
from .means import (
    MeanRequest,
    MeanResult,
    alm_mean,
    compute_mean,
    karcher_mean,
    nbmp_mean,
    scalar_alm_exponents,
    thompson_distance,
    weighted_mean,
)
from .qt import QTMatrix, qt_add, qt_adjoint, qt_mul, qt_norm, qt_scale, qt_truncate
from .symbol import Symbol, sym_apply, sym_eval, sym_geomean, sym_mul, wiener_norm

__all__ = [
    "__version__",
    "EPS", "MAX_ITER", "THRESHOLD", "TOL", "ToleranceConfig",
    "LowRankCorrection", "hankel_correction", "lr_add", "lr_compress", "lr_norm2",
    "GeometricMean", "check_matrix_list",
    "DomainError", "NoConvergence", "NonPositiveSymbol", "NotPositiveDefinite",
    "QTError", "SupportOverflow",
    "FiniteQT", "dense_oracle_mean", "fin_mean", "fin_mul",
    "IterationTrace", "qt_exp", "qt_inv", "qt_log", "qt_pow_rational", "qt_proot",
    "qt_sharp", "qt_sqrt",
    "MeanRequest", "MeanResult", "alm_mean", "compute_mean", "karcher_mean", "nbmp_mean",
    "scalar_alm_exponents", "thompson_distance", "weighted_mean",
    "QTMatrix", "qt_add", "qt_adjoint", "qt_mul", "qt_norm", "qt_scale", "qt_truncate",
    "Symbol", "sym_apply", "sym_eval", "sym_geomean", "sym_mul", "wiener_norm",
]
