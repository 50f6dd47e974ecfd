import json
import os

import numpy as np
import pytest

from proxsplit.cli import main
from proxsplit.pgm import write_csv_image, write_pgm

BOX_PROBLEM = {
    "z": [2.0, -1.0],
    "terms": [{"weight": 1.0,
               "function": {"kind": "box", "lo": [0.0, 0.0], "hi": [1.0, 1.0]},
               "operator": {"kind": "identity", "dim": 2}}],
}

SOFT_THRESHOLD_PROBLEM = {
    "z": [3.0],
    "terms": [{"weight": 0.5, "function": {"kind": "norm1"},
               "operator": {"kind": "identity", "dim": 1}},
              {"weight": 0.5, "function": {"kind": "norm1"},
               "operator": {"kind": "identity", "dim": 1}}],
}

DISK_HALFPLANE = {
    "z": [1.0, 1.0],
    "constraints": [
        {"operator": {"kind": "identity", "dim": 2},
         "set": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}},
        {"operator": {"kind": "identity", "dim": 2},
         "set": {"kind": "halfspace", "normal": [1.0, 0.0], "offset": 0.0}},
    ],
    "slater": [-0.5, 0.0],
}


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)
    return str(path)


def read_solution(out_dir):
    with open(os.path.join(out_dir, "solution.csv"), "r", encoding="ascii") as f:
        return np.array([float(line) for line in f if line.strip()])


def test_solve_box_fixture(tmp_path, capsys):
    problem = write_json(tmp_path / "p.json", BOX_PROBLEM)
    out = str(tmp_path / "out")
    code = main(["solve", problem, "--out", out, "--tol", "1e-10"])
    captured = capsys.readouterr().out
    assert code == 0
    np.testing.assert_allclose(read_solution(out), [1.0, 0.0], atol=1e-8)
    assert "RESULT converged=true" in captured
    assert os.path.isfile(os.path.join(out, "trace.csv"))


def test_solve_soft_threshold_fixture(tmp_path, capsys):
    problem = write_json(tmp_path / "p.json", SOFT_THRESHOLD_PROBLEM)
    out = str(tmp_path / "out")
    code = main(["solve", problem, "--out", out, "--tol", "1e-10"])
    assert code == 0
    assert read_solution(out)[0] == pytest.approx(2.0, abs=1e-7)
    assert "RESULT converged=true iters=" in capsys.readouterr().out


def test_solve_truncated_config_exits_1(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text('{"z": [1.0], "terms": [{"weight"')
    assert main(["solve", str(bad), "--out", str(tmp_path)]) == 1
    assert "error:" in capsys.readouterr().err


def test_solve_missing_file_exits_1(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "nope.json")]) == 1
    capsys.readouterr()


def test_solve_max_iter_exits_2(tmp_path, capsys):
    problem = write_json(tmp_path / "p.json", BOX_PROBLEM)
    out = str(tmp_path / "out")
    code = main(["solve", problem, "--out", out, "--tol", "1e-15", "--max-iter", "2",
                 "--gamma", "0.4"])
    captured = capsys.readouterr().out
    assert code == 2
    assert "RESULT converged=false" in captured
    assert os.path.isfile(os.path.join(out, "trace.csv"))  # trace written anyway


def test_project_disk_halfplane(tmp_path, capsys):
    constraints = write_json(tmp_path / "c.json", DISK_HALFPLANE)
    out = str(tmp_path / "out")
    code = main(["project", constraints, "--out", out, "--tol", "1e-9"])
    captured = capsys.readouterr().out
    assert code == 0
    np.testing.assert_allclose(read_solution(out), [0.0, 1.0], atol=1e-5)
    assert "feasibility_residual" in captured


def test_project_single_ball(tmp_path, capsys):
    payload = {
        "z": [3.0, 4.0],
        "constraints": [{"operator": {"kind": "identity", "dim": 2},
                         "set": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}}],
        "slater": [0.0, 0.0],
    }
    constraints = write_json(tmp_path / "c.json", payload)
    out = str(tmp_path / "out")
    assert main(["project", constraints, "--out", out, "--tol", "1e-10"]) == 0
    capsys.readouterr()
    np.testing.assert_allclose(read_solution(out), [0.6, 0.8], atol=1e-7)


def test_project_empty_constraints_exits_1(tmp_path, capsys):
    constraints = write_json(tmp_path / "c.json", {"z": [0.0], "constraints": []})
    assert main(["project", constraints]) == 1
    capsys.readouterr()


def test_denoise_zero_image(tmp_path, capsys):
    img_path = tmp_path / "zero.csv"
    write_csv_image(img_path, np.zeros((4, 4)))
    out = str(tmp_path / "out")
    code = main(["denoise", str(img_path), "--out", out, "--tol", "1e-9"])
    captured = capsys.readouterr().out
    assert code == 0
    recovered = np.loadtxt(os.path.join(out, "recovered.csv"), delimiter=",")
    np.testing.assert_allclose(recovered, np.zeros((4, 4)), atol=1e-8)
    assert "tv_in" in captured and "objective_out" in captured


def test_denoise_single_pixel_analytic(tmp_path, capsys):
    img_path = tmp_path / "one.csv"
    write_csv_image(img_path, np.array([[2.0]]))
    out = str(tmp_path / "out")
    code = main(["denoise", str(img_path), "--out", out,
                 "--weights", "0.5,0.25,0.25", "--tol", "1e-10"])
    capsys.readouterr()
    assert code == 0
    recovered = np.loadtxt(os.path.join(out, "recovered.csv"), delimiter=",", ndmin=2)
    assert recovered[0, 0] == pytest.approx(0.25, abs=1e-6)


def test_denoise_pgm_objective_drops(tmp_path, capsys):
    truth = np.zeros((8, 8))
    truth[:, :4] = 0.9
    img_path = tmp_path / "img.pgm"
    write_pgm(img_path, truth)
    out = str(tmp_path / "out")
    code = main(["denoise", str(img_path), "--out", out, "--noise", "0.1",
                 "--seed", "3", "--weights", "0.7,0.05,0.25", "--tol", "1e-7"])
    captured = capsys.readouterr().out
    assert code == 0
    lines = dict(line.split(" ", 1) for line in captured.splitlines() if " " in line)
    assert float(lines["objective_out"]) < float(lines["objective_in"])
    assert os.path.isfile(os.path.join(out, "recovered.pgm"))


def test_denoise_haar_requires_power_of_two(tmp_path, capsys):
    img_path = tmp_path / "odd.csv"
    write_csv_image(img_path, np.zeros((3, 5)))
    assert main(["denoise", str(img_path), "--basis", "haar"]) == 1
    assert "error:" in capsys.readouterr().err


def test_trace_plot_data(tmp_path, capsys):
    problem = write_json(tmp_path / "p.json", BOX_PROBLEM)
    out = str(tmp_path / "out")
    main(["solve", problem, "--out", out, "--tol", "1e-9"])
    capsys.readouterr()
    trace = os.path.join(out, "trace.csv")
    points = str(tmp_path / "points.dat")
    assert main(["trace-plot-data", trace, "--column", "primal",
                 "--output", points]) == 0
    capsys.readouterr()
    data = open(points).read().splitlines()
    assert len(data) >= 1
    assert all(len(line.split()) == 2 for line in data)
    assert main(["trace-plot-data", trace, "--column", "bogus"]) == 1
    capsys.readouterr()


def test_bad_usage_exits_1(capsys):
    assert main(["solve"]) == 1
    assert main(["frobnicate", "x"]) == 1
    capsys.readouterr()


def test_cli_runs_are_byte_identical(tmp_path, capsys):
    problem = write_json(tmp_path / "p.json", SOFT_THRESHOLD_PROBLEM)
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        assert main(["solve", problem, "--out", out, "--tol", "1e-9"]) == 0
        outs.append(out)
    capsys.readouterr()
    for fname in ("solution.csv", "trace.csv"):
        a = open(os.path.join(outs[0], fname), "rb").read()
        b = open(os.path.join(outs[1], fname), "rb").read()
        assert a == b
