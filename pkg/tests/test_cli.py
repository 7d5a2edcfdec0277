import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from splinenet.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, ExperimentSpec, Mode, UsageError, main, parse_seeds
from splinenet.polyspline import Spline1D
from splinenet.synth import TwoLayerNet

FAST = ["--steps", "200", "--seeds", "1..3"]


def read(path):
    return json.loads(path.read_text())


def test_parse_seeds():
    assert parse_seeds("1..3,9") == [1, 2, 3, 9]
    assert parse_seeds("4") == [4]
    assert parse_seeds("") == []
    with pytest.raises(UsageError):
        parse_seeds("a..b")


def test_spec_validation_and_round_trip():
    with pytest.raises(UsageError):
        ExperimentSpec("e", "x^3+3", seeds=())
    with pytest.raises(UsageError):
        ExperimentSpec("e", "x*y", dim=1)
    spec = ExperimentSpec.from_json({"function": "steep-cubic", "seeds": [2, 5]})
    assert spec.function == "32*x^3+3"
    assert spec.thresholds.gamma3 == 0.05
    assert ExperimentSpec.from_json(spec.to_json()) == spec
    with pytest.raises(UsageError):
        ExperimentSpec.from_json({"function": "x", "colour": "red"})


def test_synthesize_cubic_spline(tmp_path, capsys):
    assert main(["synthesize", "--function", "sin(3*x)", "--out", str(tmp_path)]) == EXIT_OK
    net = TwoLayerNet.load(tmp_path / "network.json")
    assert net.theta == 8
    report = read(tmp_path / "construction.json")
    assert report["units"] == 8 and report["final_error"] < 1e-3
    assert len(report["knots"]) == 4
    assert {"spline.json", "network.json", "construction.json", "metadata.json"} <= {p.name for p in tmp_path.iterdir()}
    assert "8 units" in capsys.readouterr().out

    again = tmp_path / "again"
    assert main(["synthesize", "--spline", str(tmp_path / "spline.json"), "--out", str(again)]) == EXIT_OK
    assert (again / "network.json").read_bytes() == (tmp_path / "network.json").read_bytes()


def test_synthesize_tanh_adds_constant_unit(tmp_path):
    assert main(["synthesize", "--function", "sin(3*x)", "--kind", "tanh", "--out", str(tmp_path)]) == EXIT_OK
    assert TwoLayerNet.load(tmp_path / "network.json").theta == 9


def test_synthesize_missed_tolerance_is_numeric_failure(tmp_path):
    assert main(["synthesize", "--function", "sin(3*x)", "--tol", "1e-12", "--out", str(tmp_path)]) == EXIT_NUMERIC
    assert (tmp_path / "network.json").exists()


def test_experiment_artifacts_and_reproducibility(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["experiment", "--function", "cubic", "--out", str(a), *FAST]) == EXIT_OK
    assert main(["experiment", "--function", "cubic", "--out", str(b), *FAST, "--workers", "2"]) == EXIT_OK
    for name in ("summary.json", "summary.csv", "dataset.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    spec_a, spec_b = read(a / "spec.json"), read(b / "spec.json")
    assert (spec_a.pop("workers"), spec_b.pop("workers")) == (1, 2)
    assert spec_a == spec_b
    for seed in (1, 2, 3):
        for name in ("trace.csv", "network.json", "report.json", "plot.csv", "run.json"):
            assert (a / f"seed_{seed}" / name).read_bytes() == (b / f"seed_{seed}" / name).read_bytes()
    summary = read(a / "summary.json")
    assert summary["totals"]["seeds"] == 3 and summary["totals"]["analysed"] == 3
    assert [r["seed"] for r in summary["per_seed"]] == [1, 2, 3]
    with open(a / "dataset.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x1", "y"] and len(rows) == 102
    with open(a / "seed_1" / "trace.csv") as fh:
        assert next(csv.reader(fh)) == ["step", "eps"]
    meta = read(a / "metadata.json")
    assert {"started", "finished", "argv", "versions"} <= set(meta)


def test_report_reaggregates(tmp_path):
    assert main(["experiment", "--function", "cubic", "--out", str(tmp_path), *FAST]) == EXIT_OK
    before = (tmp_path / "summary.json").read_bytes()
    (tmp_path / "summary.json").unlink()
    assert main(["report", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "summary.json").read_bytes() == before


def test_analyze_matches_experiment_report(tmp_path):
    exp = tmp_path / "exp"
    assert main(["experiment", "--function", "cubic", "--out", str(exp), "--steps", "200", "--seed", "4"]) == EXIT_OK
    out = tmp_path / "an"
    args = ["analyze", "--network", str(exp / "seed_4" / "network.json"), "--data", str(exp / "dataset.csv"), "--out", str(out)]
    assert main(args) == EXIT_OK
    assert (out / "report.json").read_bytes() == (exp / "seed_4" / "report.json").read_bytes()


def test_spec_file_with_flag_override(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"function": "exp2", "train": {"theta": 4, "steps": 50}, "seeds": [1, 2]}))
    out = tmp_path / "out"
    assert main(["train", "--spec", str(spec), "--theta", "3", "--out", str(out)]) == EXIT_OK
    written = read(out / "spec.json")
    assert written["train"]["theta"] == 3 and written["train"]["steps"] == 50
    assert written["mode"] == Mode.TRAIN.value
    assert TwoLayerNet.load(out / "seed_2" / "network.json").theta == 3
    assert not (out / "seed_1" / "report.json").exists()


def test_two_dimensional_training(tmp_path):
    assert main(["experiment", "--function", "sin2d", "--steps", "20", "--seed", "1", "--out", str(tmp_path)]) == EXIT_OK
    net = TwoLayerNet.load(tmp_path / "seed_1" / "network.json")
    assert net.n == 2 and net.theta == 20


def test_divergence_is_recorded(tmp_path):
    assert main(["experiment", "--function", "cubic", "--lr", "1e9", "--steps", "100", "--seed", "1", "--out", str(tmp_path)]) == EXIT_OK
    run = read(tmp_path / "seed_1" / "run.json")
    assert run["status"] == "diverged"
    assert run["artifacts"]["trace"] == "ok"
    assert run["artifacts"]["network"].startswith("failed:")
    assert read(tmp_path / "summary.json")["totals"]["diverged"] == 1


@pytest.mark.parametrize("argv", [
    ["experiment", "--function", "x^3+3", "--seeds", ""],
    ["experiment", "--function", "x^3+3", "--seeds", "1..z"],
    ["experiment", "--function", "x^^3"],
    ["experiment", "--function", "x", "--gamma1", "2"],
    ["experiment", "--function", "x*y", "--dim", "1"],
    ["frobnicate"],
    ["analyze", "--network", "missing.json"],
    ["report"],
])
def test_usage_errors(tmp_path, argv):
    if "--out" not in argv and argv[0] != "frobnicate":
        argv = argv + ["--out", str(tmp_path / "o")]
    assert main(argv) == EXIT_USAGE


def test_report_without_runs_is_usage_error(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == EXIT_USAGE


def test_console_entry_point(tmp_path):
    done = subprocess.run([sys.executable, "-m", "splinenet", "synthesize", "--function", "x^3+3", "--out", str(tmp_path)], capture_output=True, text=True)
    assert done.returncode == 0, done.stderr
    s = Spline1D.from_json(read(tmp_path / "spline.json"))
    x = np.linspace(0, 1, 11)
    assert np.allclose(s(x), x**3 + 3, atol=1e-6)
