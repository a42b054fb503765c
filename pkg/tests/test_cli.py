import json
import math
import subprocess
import sys

import pytest

from qtorsion import cli, io
from qtorsion.geometry import hausdorff_distance, regular_polygon

DISK_T2 = 0.39269908169872415  # pi/8


def run(*args):
    return cli.main([str(a) for a in args])


@pytest.fixture
def files(tmp_path):
    disk = tmp_path / "disk.json"
    io.write_json(disk, io.body_to_dict(regular_polygon(256)))
    square = tmp_path / "square.json"
    square.write_text(json.dumps({"format": "tmk-1", "directions": [[1, 0], [0, 1], [-1, 0], [0, -1]],
                                  "weights": [1, 1, 1, 1]}))
    density = tmp_path / "density.csv"
    density.write_text("angle,value\n" + "".join(
        f"{2 * math.pi * k / 32},{1 + 0.3 * math.cos(2 * math.pi * k / 32) ** 2}\n" for k in range(32)))
    return tmp_path, disk, square, density


def test_torsion_compute_disk(files, capsys):
    d, disk, _, _ = files
    out = d / "rep.json"
    assert run("torsion", "compute", "--body", disk, "--q", 2, "--h", 0.04, "--out", out,
               "--dump-mesh", d / "mesh.json") == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "torsion_report"
    assert doc["T_q"] == pytest.approx(DISK_T2, rel=2e-3)
    assert doc["identity_residual"] < 1e-2 and len(doc["measure"]["weights"]) == 256
    mesh = json.loads((d / "mesh.json").read_text())
    assert len(mesh["u"]) == len(mesh["nodes"]) == doc["mesh"]["n_nodes"]
    man = json.loads(io.manifest_path(out).read_text())
    assert man["command"].startswith("tmk torsion compute") and man["config"]["q"] == 2.0


def test_malformed_json_and_bad_q_exit_2(files, capsys):
    d, disk, _, _ = files
    bad = d / "bad.json"
    bad.write_text("{")
    assert run("torsion", "compute", "--body", bad, "--out", d / "x.json") == 2
    assert "json-syntax" in capsys.readouterr().err
    assert run("torsion", "compute", "--body", disk, "--q", 0.5, "--out", d / "x.json") == 2
    assert "q-range" in capsys.readouterr().err
    assert not (d / "x.json").exists()


def test_measure_compute_feeds_solver(files):
    d, _, _, _ = files
    pent = d / "pent.json"
    io.write_json(pent, io.body_to_dict(regular_polygon(5)))
    m = d / "m.json"
    assert run("measure", "compute", "--body", pent, "--p", 0.5, "--h", 0.04, "--out", m) == 0
    sol = d / "sol.json"
    assert run("minkowski", "solve", "--measure", m, "--out", sol) == 0
    doc = json.loads(sol.read_text())
    P = io.body_from_dict(doc["body"])
    assert hausdorff_distance(P, regular_polygon(5)) < 1e-2


def test_solve_square_and_plot(files):
    d, _, square, _ = files
    sol, log = d / "sol.json", d / "res.csv"
    assert run("minkowski", "solve", "--measure", square, "--out", sol, "--log", log) == 0
    doc = json.loads(sol.read_text())
    assert doc["status"] == "converged" and doc["residual"] <= 1e-2
    assert log.read_text().splitlines()[0] == "iter,phi,Tq,residual,theta"
    svg, csv2 = d / "sq.svg", d / "hist.csv"
    assert run("plot", "--input", sol, "--out", svg, "--log", csv2) == 0
    text = svg.read_text()
    assert text.count("<path") == 1 and text.count(" L ") == 3 and text.count("<line") == 4
    assert csv2.read_text() == log.read_text()
    # deterministic bytes
    svg2 = d / "sq2.svg"
    run("plot", "--input", sol, "--out", svg2)
    assert svg2.read_bytes() == svg.read_bytes()


def test_non_spanning_measure_exit_2(files, capsys):
    d, _, _, _ = files
    m = d / "half.json"
    m.write_text(json.dumps({"angles": [0.0, 1.0, 2.0], "weights": [1, 1, 1]}))
    assert run("minkowski", "solve", "--measure", m, "--out", d / "s.json") == 2
    assert "normals-spanning" in capsys.readouterr().err


def test_iteration_budget_exit_4_keeps_history(files):
    d, _, _, _ = files
    m = d / "m.json"
    m.write_text(json.dumps({"angles": [0.2, 1.9, 3.0, 4.4], "weights": [1.0, 0.7, 1.3, 0.9]}))
    sol, log = d / "s.json", d / "r.csv"
    assert run("minkowski", "solve", "--measure", m, "--max-outer-iters", 1, "--tol", 1e-6,
               "--out", sol, "--log", log) == 4
    doc = json.loads(sol.read_text())
    assert doc["status"] != "converged" and len(doc["history"]) >= 2
    assert len(log.read_text().splitlines()) == len(doc["history"]) + 1


def test_general_and_per_n_plots(files):
    d, _, _, density = files
    out = d / "gen.json"
    assert run("minkowski", "general", "--density", density, "--schedule", "4,8", "--h", 0.05,
               "--out", out, "--log", d / "gen.csv") == 0
    doc = json.loads(out.read_text())
    assert [s["N"] for s in doc["solutions"]] == [4, 8] and len(doc["gaps"]) == 1
    assert run("plot", "--input", out, "--out", d / "g.svg") == 0
    assert (d / "g_N4.svg").exists() and (d / "g_N8.svg").exists()


def test_plot_missing_file_exit_2(files):
    d, _, _, _ = files
    assert run("plot", "--input", d / "none.json", "--out", d / "x.svg") == 2


def test_plot_plain_body(files):
    d, disk, _, _ = files
    assert run("plot", "--input", disk, "--out", d / "disk.svg") == 0
    assert (d / "disk.svg").read_text().startswith("<svg")


def test_verify_small_run(files, capsys):
    d, _, _, _ = files
    out = d / "checks.json"
    code = run("verify", "all", "--seed", 3, "--h", 0.06, "--bodies", 2, "--pairs", 1, "--out", out)
    doc = json.loads(out.read_text())
    assert code == (0 if doc["all_pass"] else 1)
    assert len(doc["checks"]) == 11 and all("pass" in c for c in doc["checks"])
    assert "identity_q2" in capsys.readouterr().out


def test_threads_env_sets_blas_caps():
    code = "import os, qtorsion; print(os.environ['OPENBLAS_NUM_THREADS'])"
    env = {"TMK_THREADS": "1", "PATH": ""}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "1"
