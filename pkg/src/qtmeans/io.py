"""Text serialization of symbols, corrections, QT matrices and dense blocks.

Floats are written with ``repr``, the shortest decimal string that reads back
to the same double, so every format round-trips bit for bit.
"""

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .correction import LowRankCorrection
from .qt import QTMatrix
from .symbol import Symbol

__all__ = [
    "atomic_write",
    "symbol_to_csv",
    "symbol_from_csv",
    "symbol_to_json",
    "symbol_from_json",
    "correction_to_dict",
    "correction_from_dict",
    "write_correction",
    "read_correction",
    "qt_to_dict",
    "qt_from_dict",
    "save_qt",
    "load_qt",
    "finite_to_dict",
    "finite_from_dict",
    "write_dense",
    "read_dense",
]


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(x):
    if isinstance(x, complex) or np.iscomplexobj(x):
        z = complex(x)
        return repr(z).strip("()")
    return repr(float(x))


def _parse(s):
    s = s.strip()
    if "j" in s:
        return complex(s)
    return float(s)


def _array(values):
    vals = list(values)
    if any(isinstance(v, complex) for v in vals):
        return np.array(vals, dtype=complex)
    return np.array(vals, dtype=float)


def _encode(arr):
    """JSON-ready nested lists; complex entries become ``[re, im]`` pairs."""
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        return {"re": arr.real.tolist(), "im": arr.imag.tolist()}
    return arr.astype(float).tolist()


def _decode(obj):
    if isinstance(obj, dict):
        return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    return np.asarray(obj, dtype=float)


# -- symbols ------------------------------------------------------------------


def symbol_to_csv(a: Symbol, path=None):
    """CSV lines ``k,re,im``; returns the text and writes it when ``path`` is given."""
    lines = ["k,re,im"]
    for k, c in zip(range(a.lo, a.hi + 1), a.coeffs):
        c = complex(c)
        lines.append(f"{k},{c.real!r},{c.imag!r}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        atomic_write(path, text)
    return text


def symbol_from_csv(source):
    """Read the CSV form; ``source`` is a path or the text itself."""
    text = _read_text(source)
    rows = list(csv.DictReader(text.splitlines()))
    if not rows:
        return Symbol.zero()
    coef = {int(r["k"]): (float(r["re"]), float(r["im"])) for r in rows}
    lo, hi = min(coef), max(coef)
    complex_ = any(im != 0.0 for _, im in coef.values())
    c = np.zeros(hi - lo + 1, dtype=complex if complex_ else float)
    for k, (re, im) in coef.items():
        c[k - lo] = complex(re, im) if complex_ else re
    return Symbol(c, lo)


def symbol_to_json(a: Symbol):
    return {"offset": int(a.offset), "coeffs": _encode(a.coeffs)}


def symbol_from_json(obj):
    return Symbol(_decode(obj["coeffs"]), int(obj["offset"]))


# -- corrections ----------------------------------------------------------------


def correction_to_dict(E: LowRankCorrection):
    return {
        "rows_u": int(E.rows_u),
        "rows_v": int(E.rows_v),
        "rank": int(E.rank),
        "U": _encode(E.U),
        "V": _encode(E.V),
    }


def correction_from_dict(obj):
    if not obj.get("rank"):
        return LowRankCorrection.zero()
    rank = int(obj["rank"])
    U = _decode(obj["U"]).reshape(int(obj["rows_u"]), rank)
    V = _decode(obj["V"]).reshape(int(obj["rows_v"]), rank)
    return LowRankCorrection(U, V)


def write_correction(E: LowRankCorrection, stem):
    """Write ``<stem>.json`` (header), ``<stem>_U.csv`` and ``<stem>_V.csv``."""
    stem = Path(stem)
    header = {"rows_u": int(E.rows_u), "rows_v": int(E.rows_v), "rank": int(E.rank)}
    atomic_write(stem.with_suffix(".json"), json.dumps(header) + "\n")
    write_dense(E.U, stem.with_name(stem.name + "_U.csv"))
    write_dense(E.V, stem.with_name(stem.name + "_V.csv"))
    return stem


def read_correction(stem):
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    if not header["rank"]:
        return LowRankCorrection.zero()
    U = read_dense(stem.with_name(stem.name + "_U.csv"))
    V = read_dense(stem.with_name(stem.name + "_V.csv"))
    if U.shape != (header["rows_u"], header["rank"]) or V.shape != (header["rows_v"], header["rank"]):
        raise ValueError("correction blocks do not match their header")
    return LowRankCorrection(U, V)


# -- QT matrices ------------------------------------------------------------------


def qt_to_dict(A: QTMatrix):
    return {
        "symbol": symbol_to_json(A.symbol),
        "correction": correction_to_dict(A.correction),
        "flags": {"self_adjoint": bool(A.self_adjoint), "positive_definite": bool(A.positive_definite)},
    }


def qt_from_dict(obj):
    flags = obj.get("flags", {})
    return QTMatrix(
        symbol_from_json(obj["symbol"]),
        correction_from_dict(obj.get("correction", {"rank": 0})),
        self_adjoint=bool(flags.get("self_adjoint", False)),
        positive_definite=bool(flags.get("positive_definite", False)),
    )


def save_qt(A, path):
    """Save a :class:`QTMatrix` or ``FiniteQT`` as a JSON envelope."""
    from .finite import FiniteQT

    obj = finite_to_dict(A) if isinstance(A, FiniteQT) else qt_to_dict(A)
    return atomic_write(path, json.dumps(obj) + "\n")


def load_qt(source):
    obj = json.loads(_read_text(source))
    if "m" in obj:
        return finite_from_dict(obj)
    return qt_from_dict(obj)


def finite_to_dict(A):
    obj = qt_to_dict(QTMatrix(A.symbol, A.nw, self_adjoint=A.self_adjoint,
                              positive_definite=A.positive_definite))
    obj["m"] = int(A.m)
    obj["E_SE"] = correction_to_dict(A.se)
    return obj


def finite_from_dict(obj):
    from .finite import FiniteQT

    nw = qt_from_dict(obj)
    se = correction_from_dict(obj.get("E_SE", {"rank": 0}))
    return FiniteQT(int(obj["m"]), nw.symbol, nw.correction, se,
                    self_adjoint=nw.self_adjoint, positive_definite=nw.positive_definite)


# -- dense blocks --------------------------------------------------------------------


def write_dense(M, path):
    """One CSV row per matrix row; complex entries as ``re+imj``."""
    M = np.atleast_2d(np.asarray(M))
    complex_ = np.iscomplexobj(M)
    lines = []
    for row in M:
        lines.append(",".join(_fmt(complex(x)) if complex_ else repr(float(x)) for x in row))
    return atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def read_dense(source):
    text = _read_text(source)
    rows = [[_parse(s) for s in r] for r in csv.reader(text.splitlines()) if r]
    if not rows:
        return np.zeros((0, 0))
    if len({len(r) for r in rows}) != 1:
        raise ValueError("ragged CSV matrix")
    return np.vstack([_array(r) for r in rows])


def _read_text(source):
    if isinstance(source, Path):
        return source.read_text()
    if isinstance(source, str) and "\n" not in source and os.path.exists(source):
        return Path(source).read_text()
    return source
