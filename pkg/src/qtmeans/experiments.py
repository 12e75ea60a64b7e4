"""Batch experiments on the trigonometric test family.

Every symbol of the family is ``f0 + 2 f1 cos t + 2 f2 cos 2t + theta``; a
smaller ``theta`` brings the symbols closer to zero and makes all quantities
longer and harder to compute.  Each runner returns its rows and, when the
configuration names an output directory, writes them as CSV next to a
manifest.
"""

import csv
import io
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .config import EPS, MAX_ITER, TOL
from .finite import FiniteQT, fin_mean
from .io import atomic_write, save_qt
from .means import KINDS, MeanRequest, compute_mean
from .qt import QTMatrix
from .symbol import Symbol, sym_geomean

__all__ = [
    "DEFAULT_FAMILY",
    "ExperimentConfig",
    "family_symbols",
    "family_matrices",
    "run_table1",
    "run_table2",
    "run_table3",
    "run_figures",
    "write_manifest",
]

logger = logging.getLogger(__name__)

DEFAULT_FAMILY = ((2.0, 1.0, 0.0), (3.0, 2.0, 1.0), (9.0, 4.0, 4.0))
DEFAULT_THETAS = (1.0, 0.1, 0.01)
# log10 written for exact zeros in the figure grids
LOG_FLOOR = -320.0


@dataclass
class ExperimentConfig:
    """Settings shared by all experiment runners.

    Attributes
    ----------
    family : list of (f0, f1, f2)
    thetas : list of float
        Positive shifts of the family.
    eps : float
        Tolerance of the symbol interpolation.
    tol : float
        Stopping tolerance of the mean iterations.
    max_iter : int
    kinds : list of str
        Mean kinds for the tables; any of ``alm``, ``nbmp``, ``weighted``,
        ``karcher``.
    weights : list of float, optional
        Weights of the ``weighted`` kind (uniform when omitted).
    out : str, optional
        Output directory; nothing is written when ``None``.
    finite_factor : int
        Finite size in units of the infinite correction support (table 3).
    figure_size : int
        Leading block written by :func:`run_figures`.
    """

    family: list = field(default_factory=lambda: [list(f) for f in DEFAULT_FAMILY])
    thetas: list = field(default_factory=lambda: list(DEFAULT_THETAS))
    eps: float = EPS
    tol: float = TOL
    max_iter: int = MAX_ITER
    kinds: list = field(default_factory=lambda: ["alm", "nbmp"])
    weights: list = None
    out: str = None
    finite_factor: int = 3
    figure_size: int = 200

    def __post_init__(self):
        self.validate()

    def validate(self):
        self.family = [tuple(float(x) for x in f) for f in self.family]
        if any(len(f) != 3 for f in self.family) or len(self.family) < 2:
            raise ValueError("family needs at least two (f0, f1, f2) triples")
        self.thetas = [float(t) for t in self.thetas]
        if not self.thetas or any(not t > 0 for t in self.thetas):
            raise ValueError("theta values must be positive")
        for name in ("eps", "tol"):
            v = float(getattr(self, name))
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
            setattr(self, name, v)
        self.max_iter = int(self.max_iter)
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        self.kinds = [str(k).lower() for k in self.kinds]
        bad = [k for k in self.kinds if k not in KINDS]
        if bad:
            raise ValueError(f"unknown mean kind(s) {bad}; expected a subset of {KINDS}")
        if self.weights is not None:
            # their count is checked against the matrices by MeanRequest
            self.weights = [float(w) for w in self.weights]
        if int(self.finite_factor) < 1 or int(self.figure_size) < 1:
            raise ValueError("finite_factor and figure_size must be positive")
        self.finite_factor = int(self.finite_factor)
        self.figure_size = int(self.figure_size)
        return self

    def to_dict(self):
        d = asdict(self)
        d["family"] = [list(f) for f in self.family]
        return d

    @classmethod
    def from_dict(cls, obj):
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown configuration keys: {sorted(extra)}")
        return cls(**obj)


def family_symbols(config, theta):
    return [Symbol.trig(f0 + theta, f1, f2) for f0, f1, f2 in config.family]


def family_matrices(config, theta):
    """Toeplitz matrices of the shifted family, checked positive definite."""
    return [QTMatrix(a).check_positive_definite() for a in family_symbols(config, theta)]


def _tag(theta):
    return f"{theta:g}"


def _write_rows(config, name, header, rows):
    text = _csv_text(header, rows)
    if config.out is not None:
        atomic_write(Path(config.out) / name, text)
    return text


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(r[h]) if isinstance(r[h], float) else r[h] for h in header])
    return buf.getvalue()


def write_manifest(config, outputs, command=None):
    """``manifest.json`` with the configuration and library versions."""
    from . import __version__

    if config.out is None:
        return None
    manifest = {
        "config": config.to_dict(),
        "outputs": sorted(str(o) for o in outputs),
        "command": command,
        "versions": {
            "qtmeans": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "platform": platform.platform(),
    }
    return atomic_write(Path(config.out) / "manifest.json", json.dumps(manifest, indent=2) + "\n")


# -- table 1 ---------------------------------------------------------------------


def run_table1(config):
    """Length of ``g``, interpolation points and time per theta.

    Columns ``theta,length,n,seconds``; ``n`` counts interpolation points.
    """
    rows = []
    for theta in config.thetas:
        syms = family_symbols(config, theta)
        t0 = time.perf_counter()
        g, info = sym_geomean(syms, config.eps, full_output=True)
        seconds = time.perf_counter() - t0
        rows.append({
            "theta": theta,
            "length": g.numerical_length(config.eps),
            "n": info.n_points,
            "seconds": seconds,
        })
        logger.info("table1 theta=%g length=%d n=%d", theta, rows[-1]["length"], info.n_points)
    _write_rows(config, "table1.csv", ["theta", "length", "n", "seconds"], rows)
    return rows


# -- table 2 ---------------------------------------------------------------------


def _mean(config, theta, kind):
    mats = family_matrices(config, theta)
    weights = config.weights if kind == "weighted" else None
    req = MeanRequest(mats, kind=kind, weights=weights, tol=config.tol, max_iter=config.max_iter)
    return compute_mean(req)


def _save_cell(config, res, kind, theta):
    if config.out is None:
        return []
    base = Path(config.out) / f"mean_{kind}_theta{_tag(theta)}"
    paths = [save_qt(res.mean, base.with_suffix(".json"))]
    trace_path = base.with_name(base.name + "_trace.csv")
    atomic_write(trace_path, res.trace.to_csv())
    return paths + [trace_path]


def run_table2(config, results=None):
    """Iterations, time, correction support and rank per theta and kind.

    ``results``, when given, is a dict that receives the
    :class:`~qtmeans.means.MeanResult` of every cell keyed by ``(theta, kind)``.
    """
    rows = []
    for theta in config.thetas:
        for kind in config.kinds:
            res = _mean(config, theta, kind)
            G = res.mean
            rows.append({
                "theta": theta,
                "kind": kind,
                "iterations": res.iterations,
                "seconds": res.seconds,
                "support": G.support,
                "rank": G.rank,
                "symbol_check": res.symbol_check,
            })
            _save_cell(config, res, kind, theta)
            if results is not None:
                results[(theta, kind)] = res
            logger.info("table2 theta=%g kind=%s iterations=%d support=%d rank=%d",
                        theta, kind, res.iterations, G.support, G.rank)
    header = ["theta", "kind", "iterations", "seconds", "support", "rank", "symbol_check"]
    _write_rows(config, "table2.csv", header, rows)
    return rows


# -- table 3 ---------------------------------------------------------------------


def locality_error(finite_mean, infinite_mean):
    """Max entry difference on the leading ``m // 4`` block, relative to the infinite mean."""
    m = finite_mean.m if isinstance(finite_mean, FiniteQT) else finite_mean.shape[0]
    k = max(m // 4, 1)
    F = finite_mean.to_dense()[:k, :k] if isinstance(finite_mean, FiniteQT) else finite_mean[:k, :k]
    G = infinite_mean.truncate(k)
    return float(np.abs(F - G).max() / np.abs(G).max())


def run_table3(config, results=None):
    """Finite versus infinite pipelines at ``m = finite_factor * support``.

    Columns ``theta,kind,finite_seconds,infinite_seconds`` followed by the
    size ``m``, whether the finite run fell back to dense arithmetic, and the
    locality error of :func:`locality_error`.
    """
    rows = []
    for theta in config.thetas:
        for kind in config.kinds:
            res = None if results is None else results.get((theta, kind))
            if res is None:
                res = _mean(config, theta, kind)
            m = config.finite_factor * max(res.mean.support, 1)
            mats = [FiniteQT.toeplitz(m, a).check_positive_definite()
                    for a in family_symbols(config, theta)]
            weights = config.weights if kind == "weighted" else None
            t0 = time.perf_counter()
            fin = fin_mean(kind, mats, config.tol, weights, config.max_iter)
            finite_seconds = time.perf_counter() - t0
            rows.append({
                "theta": theta,
                "kind": kind,
                "finite_seconds": finite_seconds,
                "infinite_seconds": res.seconds,
                "m": m,
                "dense_fallback": bool(fin.dense_fallback),
                "locality_error": locality_error(fin.mean, res.mean),
            })
    header = ["theta", "kind", "finite_seconds", "infinite_seconds", "m", "dense_fallback",
              "locality_error"]
    _write_rows(config, "table3.csv", header, rows)
    return rows


# -- figures -----------------------------------------------------------------------


def _log10(x):
    x = np.abs(np.asarray(x))
    out = np.full(x.shape, LOG_FLOOR)
    nz = x > 0
    out[nz] = np.log10(x[nz])
    return out


def symbol_grid_rows(g: Symbol):
    """``(j, log10|g_j|)`` for every stored coefficient."""
    vals = _log10(g.coeffs)
    return [{"j": j, "log10_abs": float(v)} for j, v in zip(range(g.lo, g.hi + 1), vals)]


def matrix_grid_rows(M):
    """``(i, j, log10|M_ij|)`` over a dense block, 1-based indices."""
    L = _log10(M)
    n, k = L.shape
    ii, jj = np.divmod(np.arange(n * k), k)
    return [{"i": int(i) + 1, "j": int(j) + 1, "log10_abs": float(v)}
            for i, j, v in zip(ii, jj, L.ravel())]


def run_figures(config, results=None):
    """Symbol and correction magnitudes of the ALM and NBMP means.

    For each theta writes ``symbol_<kind>``, ``correction_<kind>`` and
    ``difference`` CSV grids (the last is ``G_ALM - G_NBMP`` on the leading
    ``figure_size`` block).  Returns the file contents keyed by name.
    """
    files = {}
    for theta in config.thetas:
        means = {}
        for kind in ("alm", "nbmp"):
            res = None if results is None else results.get((theta, kind))
            if res is None:
                res = _mean(config, theta, kind)
            means[kind] = res.mean
            G = res.mean
            tag = f"{kind}_theta{_tag(theta)}"
            files[f"symbol_{tag}.csv"] = _write_rows(
                config, f"symbol_{tag}.csv", ["j", "log10_abs"], symbol_grid_rows(G.symbol))
            E = G.correction.to_dense()
            files[f"correction_{tag}.csv"] = _write_rows(
                config, f"correction_{tag}.csv", ["i", "j", "log10_abs"], matrix_grid_rows(E))
        n = config.figure_size
        D = means["alm"].truncate(n) - means["nbmp"].truncate(n)
        name = f"difference_theta{_tag(theta)}.csv"
        files[name] = _write_rows(config, name, ["i", "j", "log10_abs"], matrix_grid_rows(D))
    return files


def max_log10(text):
    """Largest ``log10_abs`` value of a grid CSV produced here."""
    vals = [float(r["log10_abs"]) for r in csv.DictReader(text.splitlines())]
    return max(vals) if vals else -math.inf

