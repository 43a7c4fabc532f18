import csv
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from prmix.cli import main
from prmix.engine import PrConfig
from prmix.exceptions import ConfigurationError, DomainError, EmptyDataError, InputError
from prmix.simulate import (
    RESULT_COLUMNS,
    ExperimentSpec,
    fit_file,
    read_observations,
    run_experiment,
    sample_truth,
    summarize,
)

FAST = PrConfig(grid_size=200, permutations=2)


class TestSampleTruth:
    def test_exponential_mean(self):
        assert abs(sample_truth("exponential", 10**6, 1).mean() - 1) < 0.01

    def test_halfnormal_mean(self):
        assert abs(sample_truth("halfnormal", 10**6, 1).mean() - math.sqrt(2 / math.pi)) < 0.01

    def test_deterministic(self):
        a = sample_truth("halfnormal", 100, 5)
        b = sample_truth("halfnormal", 100, 5)
        assert a.tobytes() == b.tobytes()
        assert a.tobytes() != sample_truth("halfnormal", 100, 6).tobytes()

    @pytest.mark.parametrize("args", [("gamma", 5, 0), ("exponential", 0, 0)])
    def test_errors(self, args):
        with pytest.raises(ConfigurationError):
            sample_truth(*args)


class TestSpec:
    @pytest.mark.parametrize(
        "bad",
        [
            {"truth_name": "exponential", "sample_sizes": []},
            {"truth_name": "exponential", "sample_sizes": [0]},
            {"truth_name": "exponential", "sample_sizes": [10], "replications": 0},
            {"truth_name": "exponential", "sample_sizes": [10], "estimators": ["npmle"]},
            {"truth_name": "nope", "sample_sizes": [10]},
            {"truth_name": "exponential", "sample_sizes": [10], "colour": "red"},
            {"sample_sizes": [10]},
            {"truth_name": "exponential", "sample_sizes": [10], "pr_config": {"weight_constant": 0.5}},
        ],
    )
    def test_invalid(self, bad):
        with pytest.raises(ConfigurationError):
            ExperimentSpec.from_dict(bad)

    def test_roundtrip(self):
        spec = ExperimentSpec("halfnormal", (50, 100), replications=3, pr_config=FAST, seed=9)
        assert ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec

    def test_bad_json(self, tmp_path):
        p = tmp_path / "spec.json"
        p.write_text("{not json")
        with pytest.raises(ConfigurationError):
            ExperimentSpec.from_json(p)


class TestExperiment:
    def test_two_rows(self, tmp_path):
        spec = ExperimentSpec("exponential", (50,), replications=1, pr_config=FAST, output_dir=str(tmp_path))
        rows = run_experiment(spec)
        assert len(rows) == 2
        with open(tmp_path / "results.csv") as fh:
            table = list(csv.DictReader(fh))
        assert tuple(table[0]) == RESULT_COLUMNS
        assert [r["estimator"] for r in table] == ["grenander", "pr"]
        for r in table:
            assert 0 <= float(r["l1"]) <= 2 and float(r["origin_ratio"]) > 0 and r["error"] == ""
        assert table[1]["bound_violations"] == "0"
        for name in ("boxplot_l1_n50.svg", "boxplot_origin_ratio_n50.svg"):
            assert ET.parse(tmp_path / name).getroot().tag.endswith("svg")
        assert (tmp_path / "timings.csv").read_text().startswith("truth,estimator,n,replication,wall_time_ms")

    def test_parallel_matches_serial(self, tmp_path):
        kw = dict(truth_name="halfnormal", sample_sizes=(30, 40), replications=2, pr_config=FAST)
        run_experiment(ExperimentSpec(**kw, output_dir=str(tmp_path / "a")))
        run_experiment(ExperimentSpec(**kw, output_dir=str(tmp_path / "b"), workers=2))
        assert (tmp_path / "a/results.csv").read_bytes() == (tmp_path / "b/results.csv").read_bytes()
        assert (tmp_path / "a/boxplot_l1_n30.svg").read_bytes() == (tmp_path / "b/boxplot_l1_n30.svg").read_bytes()

    def test_summarize(self, tmp_path):
        spec = ExperimentSpec("exponential", (40,), replications=3, pr_config=FAST, output_dir=str(tmp_path))
        s = summarize(run_experiment(spec))
        assert set(s) == {("grenander", 40), ("pr", 40)}
        assert s[("pr", 40)]["failures"] == 0


def write_column(path, values, header="days"):
    lines = ([header] if header else []) + [repr(float(v)) for v in values]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestFitFile:
    def test_86_rows(self, tmp_path):
        x = np.random.default_rng(2).exponential(120.0, size=86).round(1) + 1
        src = write_column(tmp_path / "stays.csv", x)
        out = tmp_path / "out"
        summary = fit_file(src, FAST, out, with_grenander=True)
        assert summary["n_used"] == 86 and summary["n_dropped"] == 0
        assert summary["support"]["upper"] == x.max()
        on_disk = json.loads((out / "stays.fit.json").read_text())
        assert on_disk["n_used"] == 86
        mixing = json.loads((out / "stays.mixing.json").read_text())
        assert list(mixing) == ["lower", "upper", "atom_lower", "atom_upper", "grid", "density"]
        assert mixing["upper"] == x.max()
        assert ET.parse(out / "stays.density.svg").getroot().tag.endswith("svg")
        assert json.loads((out / "stays.grenander.json").read_text())["breakpoints"][-1] == x.max()
        header = (out / "stays.trace.csv").read_text().splitlines()[0]
        assert header == "iteration,weight,denominator"

    def test_repeated_value(self, tmp_path):
        src = write_column(tmp_path / "same.csv", [2.5] * 10, header=None)
        summary = fit_file(src, FAST, tmp_path)
        assert summary["support"]["upper"] == 2.5

    def test_empty(self, tmp_path):
        (tmp_path / "e.csv").write_text("")
        with pytest.raises(EmptyDataError):
            fit_file(tmp_path / "e.csv", FAST, tmp_path)

    def test_negative_line_number(self, tmp_path):
        src = write_column(tmp_path / "neg.csv", [1.0, 2.0, -3.0])
        with pytest.raises(DomainError) as info:
            read_observations(src)
        assert info.value.line == 4 and "line 4" in str(info.value)

    def test_garbage(self, tmp_path):
        (tmp_path / "g.csv").write_text("x\n1\nabc\n")
        with pytest.raises(InputError) as info:
            read_observations(tmp_path / "g.csv")
        assert info.value.line == 3

    def test_all_below_lower(self, tmp_path):
        src = write_column(tmp_path / "tiny.csv", [1e-7, 2e-7])
        with pytest.raises(InputError):
            fit_file(src, FAST, tmp_path)


class TestCli:
    def test_fit(self, tmp_path, capsys):
        src = write_column(tmp_path / "d.csv", np.arange(1, 30) / 3)
        code = main(["fit", str(src), "--perms", "2", "--grid", "100", "--grenander", "-o", str(tmp_path)])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["n_used"] == 29

    def test_oracle(self, capsys):
        assert main(["oracle", "exponential", "--ell", "1e-5", "--L", "10"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["bias_bound"] == pytest.approx(9.08e-5, abs=1e-6)

    def test_simulate(self, tmp_path, capsys):
        spec = tmp_path / "s.json"
        spec.write_text(json.dumps({"truth_name": "exponential", "sample_sizes": [30], "replications": 1,
                                    "pr_config": {"grid_size": 100, "permutations": 1}}))
        assert main(["simulate", str(spec), "-o", str(tmp_path / "r")]) == 0
        assert (tmp_path / "r/results.csv").exists()

    @pytest.mark.parametrize(
        "argv",
        [
            ["oracle", "gamma", "--ell", "0.1", "--L", "2"],
            ["oracle", "exponential", "--ell", "2", "--L", "1"],
            ["fit", "x.csv", "--a", "0.5"],
            ["fit", "x.csv", "--perms", "many"],
            ["frobnicate"],
        ],
    )
    def test_configuration_errors(self, argv, tmp_path):
        try:
            code = main(argv)
        except SystemExit as exc:
            code = exc.code
        assert code == 2

    def test_input_errors(self, tmp_path):
        assert main(["fit", str(tmp_path / "missing.csv")]) == 3
        bad = write_column(tmp_path / "bad.csv", [1.0, -1.0])
        assert main(["fit", str(bad)]) == 3

    def test_missing_spec(self, tmp_path):
        assert main(["simulate", str(tmp_path / "none.json")]) == 2
