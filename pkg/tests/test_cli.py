import csv
import json
import re

import numpy as np
import pytest

from dictopt import benchmarks
from dictopt import io as mio
from dictopt.cli import main
from dictopt.data import TrajectoryData
from dictopt.dictionary import Coordinate, Dictionary, gaussian_dictionary


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_simulate_ou_and_reproducibility(tmp_path, capsys):
    argv = ["simulate", "--system", "ou", "--alpha", "1", "--beta", "4", "--tau", "0.5", "--m", "5000", "--seed", "7"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    a, b = (tmp_path / "a" / "data.csv").read_bytes(), (tmp_path / "b" / "data.csv").read_bytes()
    assert a == b
    data = mio.read_dataset(tmp_path / "a" / "data.csv")
    assert data.X.shape == (1, 5000) and data.tau == 0.5 and data.meta["seed"] == 7
    assert "wrote" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["simulate", "--system", "ou", "--tau", "0.5", "--eta", "0.3"],
    ["simulate", "--system", "pendulum"],
    ["simulate", "--set", "gamma=2"],
    ["fit", "--max-iters", "-3"],
    ["frobnicate"],
    ["scan", "--system", "chua", "--param", "b0.0", "--range", "0", "1"],
])
def test_configuration_errors_exit_2(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)]) == 2


def test_bad_config_file_exit_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"system": "ou", "colour": "red"}))
    assert main(["--config", str(cfg), "simulate", "--out", str(tmp_path)]) == 2
    cfg.write_text("{broken")
    assert main(["simulate", "--config", str(cfg)]) == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"system": "ou", "params": {"m": 30}, "seed": 1, "out": str(tmp_path / "f")}))
    assert main(["--config", str(cfg), "simulate", "--m", "40"]) == 0
    assert mio.read_dataset(tmp_path / "f" / "data.csv").X.shape == (1, 40)


def test_blowup_exit_3(tmp_path, capsys):
    # alpha * eta = 10 makes each Euler step multiply the state by -9
    argv = ["simulate", "--system", "ou", "--alpha", "1000", "--eta", "0.01", "--tau", "10", "--m", "10",
            "--out", str(tmp_path)]
    assert main(argv) == 3
    assert "step" in capsys.readouterr().err


def test_divergence_exit_4_writes_history(tmp_path):
    X = np.random.default_rng(0).uniform(-1, 1, (1, 50))
    mio.write_dataset(TrajectoryData(X, Xdot=-X), tmp_path / "d.csv")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dictionary": mio.dictionary_to_spec(Dictionary([Coordinate(0)]))}))
    out = tmp_path / "o"
    # Adam moves each entry by about the step size, so one step overshoots the 1e12 limit
    argv = ["fit", "--config", str(cfg), "--data", str(tmp_path / "d.csv"), "--step-size", "1e13",
            "--max-iters", "50", "--out", str(out)]
    assert main(argv) == 4
    assert _rows(out / "history.csv")[0][0] == "iteration"


def test_fit_ou_eigenvalue_table(tmp_path, capsys):
    out = tmp_path / "ou"
    assert main(["fit", "--system", "ou", "--out", str(out)]) == 0
    rows = _rows(out / "eigenvalues.csv")
    moduli = [float(r[3]) for r in rows[1:4]]
    assert np.allclose(moduli, [1.0, 0.6065, 0.3679], rtol=0.05)
    assert _rows(out / "history.csv")[0] == ["iteration", "loss_1", "loss_2", "grad_norm_A", "grad_norm_w"]
    eig = _rows(out / "eigenfunctions.csv")
    assert eig[0][:3] == ["x1", "phi1_re", "phi1_im"] and len(eig) == 201
    model = mio.load_model(out / "model.json")
    assert model.provenance["refit"] is True
    capsys.readouterr()
    assert main(["spectrum", str(out / "model.json"), "--lo", "-1", "--hi", "1", "--points", "11",
                 "--out", str(tmp_path / "sp")]) == 0
    assert len(_rows(tmp_path / "sp" / "eigenfunctions.csv")) == 12
    assert capsys.readouterr().out.splitlines()[0].startswith("1 1.0000")


def test_fit_chua_region1_report(tmp_path):
    out = tmp_path / "chua"
    assert main(["fit", "--system", "chua", "--out", str(out)]) == 0
    report = (out / "report.txt").read_text()
    assert re.search(r"sin\(1\.20\d*\*x1\)", report)
    assert mio.load_model(out / "model.json").Xi.shape == (8, 3)


def test_fit_heat_report_form(tmp_path):
    out = tmp_path / "heat"
    assert main(["fit", "--system", "heat", "--out", str(out)]) == 0
    lines = (out / "report.txt").read_text().splitlines()
    assert re.fullmatch(r"u_t = -\S+ \* exp\(chi\*u\)\*u_x\^2 \+ \S+ \* exp\(chi\*u\)\*u_xx", lines[0])
    assert lines[1].startswith("chi = -")


def test_scan_chua_minimum(tmp_path):
    out = tmp_path / "scan"
    argv = ["scan", "--system", "chua", "--param", "b6.0", "--range", "0.2", "3.0", "--resolution", "561",
            "--out", str(out)]
    assert main(argv) == 0
    table = np.array(_rows(out / "scan.csv")[1:], dtype=float)
    assert table.shape == (561, 2)
    assert abs(table[table[:, 1].argmin(), 0] - 1.208) < 0.01
    assert table[:, 1].min() < 1e-5 * table[:, 1].max()


def _toy(tmp_path, planted=0.3):
    # xdot is a Gaussian bump at the planted centre, sampled symmetrically around it
    s = np.linspace(0.05, 1.0, 40)
    X = np.concatenate([planted - s, [planted], planted + s])[None]
    Xd = np.exp(-((X - planted) ** 2) / (2 * 0.4**2))
    mio.write_dataset(TrajectoryData(X, Xdot=Xd), tmp_path / "toy.csv")
    cfg = tmp_path / "toy.json"
    spec = mio.dictionary_to_spec(gaussian_dictionary(np.array([[0.0]]), 0.4))
    cfg.write_text(json.dumps({"dictionary": spec}))
    return ["scan", "--config", str(cfg), "--data", str(tmp_path / "toy.csv"), "--param", "b0.0"]


def test_scan_toy_parabola(tmp_path):
    argv = _toy(tmp_path) + ["--range", "0.1", "0.5", "--resolution", "41", "--out", str(tmp_path / "o")]
    assert main(argv) == 0
    table = np.array(_rows(tmp_path / "o" / "scan.csv")[1:], dtype=float)
    loss = table[:, 1]
    k = loss.argmin()
    assert np.isclose(table[k, 0], 0.3) and loss[k] < 1e-20
    assert np.allclose(loss[:k][::-1], loss[k + 1 :], rtol=1e-6)
    assert np.all(np.diff(loss[: k + 1]) < 0) and np.all(np.diff(loss[k:]) > 0)


def test_scan_resolution_one_gives_single_row(tmp_path):
    argv = _toy(tmp_path) + ["--range", "0.2", "0.2", "--resolution", "1", "--out", str(tmp_path / "o")]
    assert main(argv) == 0
    assert len(_rows(tmp_path / "o" / "scan.csv")) == 2


def test_scan_untrainable_or_unknown_parameter(tmp_path):
    assert main(_toy(tmp_path)[:-1] + ["w[5]", "--range", "0", "1", "--out", str(tmp_path)]) == 2
    assert main(["scan", "--system", "chua", "--param", "b0.0", "--range", "0", "1", "--out", str(tmp_path)]) == 2


def test_fit_does_not_mutate_input(tmp_path):
    argv = _toy(tmp_path)
    before = (tmp_path / "toy.csv").read_bytes()
    fit = ["fit"] + argv[1:5] + ["--max-iters", "5", "--out", str(tmp_path / "o")]
    assert main(fit) == 0
    assert (tmp_path / "toy.csv").read_bytes() == before


def test_benchmark_only_and_report(tmp_path, capsys):
    assert main(["benchmark", "--only", "ou", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [l.split(" (")[0] for l in lines] == ["criterion 1", "criterion 2", "criterion 3"]
    report = json.loads((tmp_path / "benchmark.json").read_text())
    assert [r["criterion"] for r in report] == [1, 2, 3] and all(r["passed"] for r in report)
    assert main(["benchmark", "--only", "nonesuch"]) == 2


def test_corrupted_tolerance_names_the_failure():
    tol = dict(benchmarks.TOLERANCES, ou_eig_rel=1e-9)
    results = benchmarks.run_benchmarks(["ou"], tol=tol)
    first = results[0]
    assert first.number == 1 and not first.passed
    assert "criterion 1" in benchmarks.format_result(first) and "FAIL" in benchmarks.format_result(first)
