"""Command-line driver for the experiments and for means of saved matrices.

Examples
--------
::

    qtmeans --table 1 --theta 1 0.1 --out results
    qtmeans --table 2 --kinds nbmp --theta 1 --out results
    qtmeans --figures --theta 1 --out results
    qtmeans --input a.json b.json c.json --kinds nbmp --out results
    qtmeans --config run.json

Exit status is 0 on success.  On failure a JSON object
``{"error": ..., "message": ...}`` goes to stderr (and to ``error.json`` in
the output directory) and the status is 1.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .exceptions import NoConvergence
from .experiments import (
    ExperimentConfig,
    run_figures,
    run_table1,
    run_table2,
    run_table3,
    write_manifest,
)
from .io import atomic_write, load_qt, save_qt
from .means import KINDS, MeanRequest, compute_mean

logger = logging.getLogger("qtmeans")


def build_parser():
    p = argparse.ArgumentParser(
        prog="qtmeans",
        description="Geometric means of quasi-Toeplitz matrices: experiment tables and figure data.",
    )
    p.add_argument("--table", type=int, choices=(1, 2, 3), action="append",
                   help="table to produce; repeat for several")
    p.add_argument("--figures", action="store_true", help="write symbol/correction grids")
    p.add_argument("--theta", type=float, nargs="+", help="theta values (default 1 0.1 0.01)")
    p.add_argument("--eps", type=float, help="symbol interpolation tolerance")
    p.add_argument("--tol", type=float, help="mean iteration tolerance")
    p.add_argument("--max-iter", type=int, help="iteration cap of the mean sequences")
    p.add_argument("--kinds", nargs="+", choices=KINDS, help="mean kinds (default alm nbmp)")
    p.add_argument("--weights", type=float, nargs="+", help="weights of the weighted mean")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="JSON file; its keys override the flags")
    p.add_argument("--input", nargs="+", metavar="JSON",
                   help="saved QT matrices whose mean is computed instead of the family")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def config_from_args(args):
    """Merge flags and the optional JSON file into an :class:`ExperimentConfig`."""
    opts = {}
    for flag, key in (("theta", "thetas"), ("eps", "eps"), ("tol", "tol"),
                      ("max_iter", "max_iter"), ("kinds", "kinds"),
                      ("weights", "weights"), ("out", "out")):
        value = getattr(args, flag)
        if value is not None:
            opts[key] = value
    if args.config:
        opts.update(json.loads(Path(args.config).read_text()))
    return ExperimentConfig.from_dict(opts)


def run_inputs(config, paths):
    """Mean of the matrices stored at ``paths`` for every configured kind."""
    mats = [load_qt(p) for p in paths]
    outputs, summary = [], []
    for kind in config.kinds:
        weights = config.weights if kind == "weighted" else None
        req = MeanRequest(mats, kind=kind, weights=weights, tol=config.tol, max_iter=config.max_iter)
        res = compute_mean(req)
        summary.append({
            "kind": kind,
            "iterations": res.iterations,
            "seconds": res.seconds,
            "support": res.mean.support,
            "rank": res.mean.rank,
            "symbol_check": res.symbol_check,
        })
        if config.out is not None:
            out = Path(config.out)
            outputs.append(save_qt(res.mean, out / f"mean_{kind}.json"))
            outputs.append(atomic_write(out / f"mean_{kind}_trace.csv", res.trace.to_csv()))
    return summary, outputs


def _report(rows):
    for r in rows:
        print(json.dumps(r, default=str))


def run(args):
    config = config_from_args(args)
    tables = sorted(set(args.table or []))
    if not tables and not args.figures and not args.input:
        raise ValueError("nothing to do: give --table, --figures or --input")
    outputs = []
    if args.input:
        summary, outputs = run_inputs(config, args.input)
        _report(summary)
    results = {}
    if 1 in tables:
        _report(run_table1(config))
        outputs.append("table1.csv")
    if 2 in tables:
        _report(run_table2(config, results))
        outputs.append("table2.csv")
    if 3 in tables:
        _report(run_table3(config, results))
        outputs.append("table3.csv")
    if args.figures:
        files = run_figures(config, results)
        outputs.extend(files)
        print(json.dumps({"figures": sorted(files)}))
    if config.out is not None:
        write_manifest(config, outputs, command=sys.argv)
    return 0


def _fail(exc, out_dir):
    err = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, NoConvergence) and getattr(exc, "trace", None) is not None:
        err["residual_history"] = list(exc.trace.residual_history)
    text = json.dumps(err)
    print(text, file=sys.stderr)
    if out_dir is not None:
        try:
            atomic_write(Path(out_dir) / "error.json", text + "\n")
        except OSError:
            pass
    return 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except Exception as exc:  # reported as JSON, never as a traceback
        logger.debug("failure", exc_info=True)
        return _fail(exc, args.out)


if __name__ == "__main__":
    sys.exit(main())
