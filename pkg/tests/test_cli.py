import json
import subprocess
import sys

import pytest

from conftest import family_matrices
from qtmeans.cli import build_parser, config_from_args, main
from qtmeans.experiments import ExperimentConfig, max_log10, run_figures, run_table2
from qtmeans.io import load_qt, save_qt

# constant symbols keep the mean runs instant
CONSTANTS = [[1.0, 0.0, 0.0], [8.0, 0.0, 0.0], [27.0, 0.0, 0.0]]
PAIR = [[3.0, 1.0, 0.0], [4.0, 1.0, 0.5]]


def write_config(tmp_path, **kw):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(kw))
    return str(path)


def json_lines(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


class TestParser:
    def test_flags(self):
        args = build_parser().parse_args(
            ["--table", "1", "--table", "2", "--theta", "1", "0.5", "--eps", "1e-12",
             "--tol", "1e-10", "--max-iter", "20", "--kinds", "nbmp", "karcher", "--out", "x"])
        cfg = config_from_args(args)
        assert args.table == [1, 2]
        assert cfg.thetas == [1.0, 0.5] and cfg.kinds == ["nbmp", "karcher"]
        assert (cfg.eps, cfg.tol, cfg.max_iter, cfg.out) == (1e-12, 1e-10, 20, "x")

    def test_config_overrides_flags(self, tmp_path):
        path = write_config(tmp_path, thetas=[2.0], tol=1e-9)
        args = build_parser().parse_args(["--theta", "1", "--tol", "1e-6", "--config", path])
        cfg = config_from_args(args)
        assert cfg.thetas == [2.0] and cfg.tol == 1e-9

    def test_unknown_kind_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["--kinds", "harmonic"])

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(thetas=[0.0])
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"colour": "red"})
        with pytest.raises(ValueError):
            ExperimentConfig(tol=2.0)


class TestRuns:
    def test_table1(self, tmp_path, capsys):
        assert main(["--table", "1", "--theta", "1", "--out", str(tmp_path)]) == 0
        (row,) = json_lines(capsys.readouterr().out)
        assert row["theta"] == 1.0 and row["n"] >= row["length"] > 0
        header = (tmp_path / "table1.csv").read_text().splitlines()[0]
        assert header == "theta,length,n,seconds"
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["config"]["thetas"] == [1.0]
        assert "numpy" in manifest["versions"] and "table1.csv" in manifest["outputs"]

    def test_table2_and_3(self, tmp_path, capsys):
        path = write_config(tmp_path, family=PAIR, thetas=[1.0], kinds=["nbmp"],
                            out=str(tmp_path))
        assert main(["--table", "2", "--table", "3", "--config", path]) == 0
        rows = json_lines(capsys.readouterr().out)
        t2, t3 = rows
        assert t2["kind"] == "nbmp" and t2["symbol_check"] <= 1e-8
        assert t3["m"] == 3 * t2["support"] and t3["dense_fallback"] is False
        assert t3["locality_error"] <= 1e-10
        mean = load_qt(tmp_path / "mean_nbmp_theta1.json")
        assert mean.support == t2["support"]
        assert (tmp_path / "mean_nbmp_theta1_trace.csv").read_text().startswith("iter,residual")

    def test_deterministic(self, tmp_path):
        outs = []
        for d in ("a", "b"):
            cfg = ExperimentConfig(family=PAIR, thetas=[1.0], kinds=["nbmp"], out=str(tmp_path / d))
            run_table2(cfg)
            outs.append((tmp_path / d / "mean_nbmp_theta1.json").read_text())
        assert outs[0] == outs[1]

    def test_figures_of_constants(self, tmp_path):
        cfg = ExperimentConfig(family=CONSTANTS, thetas=[1.0], figure_size=5, out=str(tmp_path))
        files = run_figures(cfg)
        assert set(files) == {"symbol_alm_theta1.csv", "symbol_nbmp_theta1.csv",
                              "correction_alm_theta1.csv", "correction_nbmp_theta1.csv",
                              "difference_theta1.csv"}
        # the geometric mean of 2, 9 and 28 has a single coefficient
        (row,) = files["symbol_nbmp_theta1.csv"].splitlines()[1:]
        assert row.startswith("0,")
        # both means stop at the default tolerance relative to 6
        assert max_log10(files["difference_theta1.csv"]) <= -11

    def test_input_files(self, tmp_path, capsys):
        paths = []
        for i, A in enumerate(family_matrices(1.0)[:2]):
            paths.append(str(save_qt(A, tmp_path / f"A{i}.json")))
        out = tmp_path / "out"
        code = main(["--input", *paths, "--kinds", "nbmp", "weighted", "--weights", "0.5", "0.5",
                     "--out", str(out)])
        assert code == 0
        rows = json_lines(capsys.readouterr().out)
        assert [r["kind"] for r in rows] == ["nbmp", "weighted"]
        assert (out / "mean_weighted.json").exists()


class TestErrors:
    def test_nothing_to_do(self, capsys):
        assert main([]) == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ValueError"

    def test_bad_theta_writes_error_json(self, tmp_path, capsys):
        assert main(["--table", "1", "--theta", "-1", "--out", str(tmp_path)]) == 1
        err = json.loads(capsys.readouterr().err)
        assert "positive" in err["message"]
        assert json.loads((tmp_path / "error.json").read_text()) == err

    def test_iteration_cap(self, tmp_path, capsys):
        path = write_config(tmp_path, family=PAIR[:1] + [[9.0, 4.0, 4.0]], thetas=[1.0],
                            kinds=["karcher"], max_iter=1)
        assert main(["--table", "2", "--config", path]) == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "NoConvergence"

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "qtmeans", "--theta", "0"],
                              capture_output=True, text=True)
        assert proc.returncode == 1
        assert json.loads(proc.stderr)["error"] == "ValueError"
