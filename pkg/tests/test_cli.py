"""End-to-end tests of the command-line interface."""

import json

import numpy as np
import pytest

from mlrfit.cli import EXIT_CONFIG_ERROR, EXIT_OK, main
from mlrfit.datagen import ScenarioSpec, generate, save_instance


@pytest.fixture()
def instance_dir(tmp_path):
    spec = ScenarioSpec(scenario="A", n_train=40, n_test=60, p=10, seed=0)
    path = tmp_path / "inst"
    save_instance(generate(spec), path)
    return path


class TestGenerate:
    def test_writes_instances(self, tmp_path, capsys):
        code = main([
            "generate", "--scenario", "B", "--n-train", "20", "--n-test", "10",
            "--p", "12", "--repetitions", "2", "--out", str(tmp_path / "g"),
        ])
        assert code == EXIT_OK
        dirs = sorted(p.name for p in (tmp_path / "g").iterdir())
        assert dirs == ["B_sigma10_rep0", "B_sigma10_rep1"]
        for d in dirs:
            assert (tmp_path / "g" / d / "meta.json").exists()


class TestFit:
    def test_fit_instance_directory(self, instance_dir, tmp_path, capsys):
        out = tmp_path / "fit.json"
        code = main(["fit", "--data", str(instance_dir), "--procedure", "R_MLR",
                     "--out", str(out)])
        assert code == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["procedure"] == "R_MLR"
        assert payload["converged"]
        assert len(payload["beta_hat"]) == 10
        assert "r2_test=" in capsys.readouterr().out

    def test_fit_csv(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((40, 3))
        y = X @ np.array([1.0, -2.0, 0.5]) + 0.1 * rng.standard_normal(40)
        lines = ["x1,x2,x3,y"] + [
            ",".join(str(v) for v in row) + f",{t}" for row, t in zip(X, y)
        ]
        f = tmp_path / "data.csv"
        f.write_text("\n".join(lines) + "\n")
        code = main(["fit", "--csv", str(f), "--target", "y"])
        assert code == EXIT_OK

    def test_missing_target_is_config_error(self, tmp_path, capsys):
        f = tmp_path / "d.csv"
        f.write_text("a,b\n1,2\n3,4\n")
        code = main(["fit", "--csv", str(f), "--target", "nope"])
        assert code == EXIT_CONFIG_ERROR


class TestBenchmark:
    def test_outputs_and_exit_code(self, tmp_path, capsys):
        out = tmp_path / "bench"
        code = main([
            "benchmark", "--scenarios", "A:10", "--procedures", "R_MLR,CV_RIDGE",
            "--repetitions", "2", "--out", str(out),
        ])
        assert code == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert len(report["per_repetition"]) == 4
        assert (out / "per_repetition.csv").exists()
        assert (out / "summary.csv").exists()

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "scenarios": [{"scenario": "A", "n_train": 30, "n_test": 40, "p": 8}],
            "procedures": ["R_MLR"],
            "repetitions": 5,
        }))
        out = tmp_path / "bench"
        # the flag must win over the config file's repetition count
        code = main(["benchmark", "--config", str(cfg), "--repetitions", "1",
                     "--out", str(out)])
        assert code == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert len(report["per_repetition"]) == 1

    def test_unknown_procedure_is_config_error(self, tmp_path, capsys):
        code = main(["benchmark", "--procedures", "NOPE", "--out", str(tmp_path)])
        assert code == EXIT_CONFIG_ERROR

    def test_output_dir_env_default(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("MLRFIT_OUTPUT_DIR", str(tmp_path / "envout"))
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "scenarios": [{"scenario": "A", "n_train": 30, "n_test": 40, "p": 8}],
            "procedures": ["R_MLR"],
            "repetitions": 1,
        }))
        code = main(["benchmark", "--config", str(cfg)])
        assert code == EXIT_OK
        assert (tmp_path / "envout" / "report.json").exists()


class TestCurveAndSweep:
    def test_curve_csv(self, tmp_path, capsys):
        code = main(["curve", "--scenario", "A", "--grid-size", "5",
                     "--out", str(tmp_path)])
        assert code == EXIT_OK
        lines = (tmp_path / "curves.csv").read_text().strip().splitlines()
        assert len(lines) == 6  # header + 5 grid points
        assert lines[0].startswith("lambda,")

    def test_sweep_csv(self, tmp_path, capsys):
        code = main(["sweep", "--scenario", "A", "--T-values", "1,2",
                     "--repetitions", "2", "--out", str(tmp_path)])
        assert code == EXIT_OK
        lines = (tmp_path / "sweep.csv").read_text().strip().splitlines()
        assert len(lines) == 3


class TestMwTest:
    def test_compare_two_procedures(self, tmp_path, capsys):
        out = tmp_path / "bench"
        main(["benchmark", "--scenarios", "A:10", "--procedures", "R_MLR,CV_RIDGE",
              "--repetitions", "3", "--out", str(out)])
        capsys.readouterr()
        code = main(["mwtest", "--csv", str(out / "per_repetition.csv"),
                     "--proc-a", "R_MLR", "--proc-b", "CV_RIDGE"])
        assert code == EXIT_OK
        assert "p=" in capsys.readouterr().out

    def test_unknown_procedure_is_config_error(self, tmp_path, capsys):
        f = tmp_path / "per.csv"
        f.write_text("scenario,procedure,repetition,r2_test,error\nA,X,0,0.5,\n")
        code = main(["mwtest", "--csv", str(f), "--proc-a", "X", "--proc-b", "Y"])
        assert code == EXIT_CONFIG_ERROR
