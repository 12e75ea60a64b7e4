import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qtmeans import MeanRequest, QTMatrix, Symbol, compute_mean

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

FAMILY = ((2.0, 1.0, 0.0), (3.0, 2.0, 1.0), (9.0, 4.0, 4.0))


def family_symbols(theta=1.0):
    return [Symbol.trig(f0 + theta, f1, f2) for f0, f1, f2 in FAMILY]


def family_matrices(theta=1.0):
    return [QTMatrix(a, positive_definite=True) for a in family_symbols(theta)]


@functools.lru_cache(maxsize=None)
def family_mean(kind, theta=1.0, weights=None):
    """Mean of the shifted family, computed once per session."""
    req = MeanRequest(family_matrices(theta), kind=kind, weights=weights)
    return compute_mean(req)


def random_banded(rng, bw=2, rank=2, rows=6, shift=None):
    """Random self-adjoint positive definite QT matrix with a small correction."""
    c = rng.standard_normal(bw)
    coeffs = np.concatenate([c[::-1], [0.0], c])
    a0 = np.abs(coeffs).sum() + 1.0 if shift is None else shift
    coeffs[bw] = a0
    sym = Symbol(coeffs, -bw)
    if rank == 0:
        return QTMatrix(sym, self_adjoint=True)
    U = 0.1 * rng.standard_normal((rows, rank))
    from qtmeans import LowRankCorrection

    return QTMatrix(sym, LowRankCorrection(U, U), self_adjoint=True)


def rel_err(X, Y):
    return float(np.abs(X - Y).max() / max(np.abs(Y).max(), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
