import json

import numpy as np
import pytest

from poltomo import accel
from poltomo.cli import EXIT_CHECK, EXIT_IO, EXIT_OK, EXIT_USAGE, PINNED_INVERSION_BASELINE, main, make_field
from poltomo.io import read_grid_field


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out = capsys.readouterr()
    return code, out.out, out.err


def checksums(stdout):
    return [line.split()[1] for line in stdout.splitlines() if line.startswith("sha256 ")]


@pytest.mark.parametrize("cmd, extra", [
    ("gen-field", ["--nodes", 9]),
    ("forward", ["--rays", 20, "--segments", 64]),
    ("linear-forward", ["--rays", 20, "--segments", 64]),
    ("sdata", ["--rays", 20, "--segments", 64]),
    ("moments", ["--order", 1]),
    ("decompose", ["--nodes", 9]),
])
def test_commands_are_deterministic(cmd, extra, tmp_path, capsys):
    a, b = tmp_path / "a.out", tmp_path / "b.out"
    c1, o1, _ = run(capsys, cmd, "--seed", 3, "-o", a, *extra)
    c2, o2, _ = run(capsys, cmd, "--seed", 3, "-o", b, *extra)
    assert c1 == c2 == EXIT_OK
    assert checksums(o1) == checksums(o2)
    assert a.read_bytes() == b.read_bytes()
    log = json.loads((tmp_path / "a.out.log").read_text())
    assert "timestamp" in log and log["checksums"][str(a)] == checksums(o1)[0]


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "grid": {"nodes": 5}, "field": {"family": "lambda-E"}}))
    code, _, _ = run(capsys, "gen-field", "--config", cfg, "-o", tmp_path / "f.ptf")
    assert code == EXIT_OK
    assert read_grid_field(tmp_path / "f.ptf").grid.dims == (5, 5, 5)
    code, _, _ = run(capsys, "gen-field", "--config", cfg, "--nodes", 7, "-o", tmp_path / "g.ptf")
    assert read_grid_field(tmp_path / "g.ptf").grid.dims == (7, 7, 7)


def test_threads_option(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "forward", "--seed", 2, "--rays", 30, "--segments", 32, "-o", a)
    code, _, _ = run(capsys, "--threads", 2, "forward", "--seed", 2, "--rays", 30, "--segments", 32, "-o", b)
    accel.set_threads(1)
    assert code == EXIT_OK and a.read_bytes() == b.read_bytes()


def test_usage_errors(tmp_path, capsys):
    assert run(capsys, "forward", "-o", tmp_path / "x")[0] == EXIT_USAGE  # no seed
    assert run(capsys, "gen-field", "--seed", 1)[0] == EXIT_USAGE  # no output
    assert run(capsys)[0] == EXIT_USAGE
    assert run(capsys, "bogus")[0] == EXIT_USAGE
    assert run(capsys, "forms", "--n", 5, "-o", tmp_path / "x")[0] == EXIT_USAGE
    assert run(capsys, "forward", "--seed", 1, "--rays", 0, "-o", tmp_path / "x")[0] == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "forms", "--config", bad, "-o", tmp_path / "x")[0] == EXIT_USAGE


def test_io_errors(tmp_path, capsys):
    assert run(capsys, "forms", "-o", tmp_path / "missing" / "r.json")[0] == EXIT_IO
    junk = tmp_path / "junk.ptf"
    junk.write_bytes(b"nope")
    assert run(capsys, "decompose", "--field-file", junk, "-o", tmp_path / "r.json")[0] == EXIT_IO


def test_forms_report(tmp_path, capsys):
    code, _, _ = run(capsys, "forms", "-o", tmp_path / "f.json")
    rep = json.loads((tmp_path / "f.json").read_text())
    assert code == EXIT_OK and rep["pass"]
    assert rep["entries"][0]["target"] == pytest.approx(-2.0 / 3.0)
    assert abs(rep["entries"][0]["measured"] + 2.0 / 3.0) <= 1e-10
    code, _, _ = run(capsys, "forms", "--n", 4, "-o", tmp_path / "g.json")
    assert code == EXIT_OK


def test_kernel_check_exit_codes(tmp_path, capsys):
    out = tmp_path / "k.json"
    code, _, _ = run(capsys, "kernel-check", "--family", "kernel-v", "--seed", 4, "--expect", "in-kernel", "-o", out)
    assert code == EXIT_OK and json.loads(out.read_text())["verdict"] == "in-kernel"
    code, _, _ = run(capsys, "kernel-check", "--family", "gauss-poly", "--seed", 4, "--expect", "in-kernel", "-o", out)
    assert code == EXIT_CHECK
    assert json.loads(out.read_text())["verdict"] == "not-in-kernel"


def test_potential_family_data(tmp_path, capsys):
    out = tmp_path / "phi.csv"
    code, _, _ = run(capsys, "forward", "--family", "potential", "--seed", 1, "--rays", 10, "--segments", 512,
                     "-o", out)
    assert code == EXIT_OK
    rows = out.read_text().splitlines()[2:]
    vals = np.array([[float(v) for v in r.split(",")[8:-1]] for r in rows])
    eye = np.zeros(18)
    eye[[0, 8, 16]] = 1.0
    assert np.max(np.abs(vals - eye)) <= 1e-6


def test_decompose_outputs(tmp_path, capsys):
    code, _, _ = run(capsys, "decompose", "--family", "potential", "--nodes", 13, "-o", tmp_path / "d.json",
                     "--closed-output", tmp_path / "c.ptf")
    rep = json.loads((tmp_path / "d.json").read_text())
    assert code == EXIT_OK and rep["pass"] and rep["lambda_max"] > 0.5
    assert read_grid_field(tmp_path / "c.ptf").grid.dims == (13, 13, 13)


def test_invert_small(tmp_path, capsys):
    cfg = tmp_path / "inv.json"
    cfg.write_text(json.dumps({"seed": 5, "rays": {"count": 1500}, "segments": 128,
                               "field": {"family": "gauss-poly", "a": 4.0, "epsilon": 0.02},
                               "inversion": {"nodes": 10}}))
    code, out, _ = run(capsys, "invert", "--config", cfg, "-o", tmp_path / "est.ptf", "--report", tmp_path / "r.json",
                       "--baseline", 0.9)
    rep = json.loads((tmp_path / "r.json").read_text())
    assert code == EXIT_OK and rep["pass"] and rep["baseline"] == 0.9
    assert len(checksums(out)) == 2
    code, _, _ = run(capsys, "invert", "--config", cfg, "-o", tmp_path / "est2.ptf", "--report",
                     tmp_path / "r2.json", "--baseline", 1e-6)
    assert code == EXIT_CHECK
    assert (tmp_path / "est.ptf").read_bytes() == (tmp_path / "est2.ptf").read_bytes()
    assert PINNED_INVERSION_BASELINE == 0.040


def test_invert_from_files(tmp_path, capsys):
    common = ["--seed", 6, "--rays", 800, "--segments", 64]
    run(capsys, "forward", "--family", "zero", *common, "-o", tmp_path / "p1.csv")
    run(capsys, "forward", "--epsilon", 0.02, "--a", 4.0, *common, "-o", tmp_path / "p2.csv")
    code, _, _ = run(capsys, "invert", "--phi1", tmp_path / "p1.csv", "--phi2", tmp_path / "p2.csv", "--inv-nodes", 8,
                     "--segments", 64, "-o", tmp_path / "e.ptf", "--report", tmp_path / "r.json")
    assert code == EXIT_OK
    assert json.loads((tmp_path / "r.json").read_text())["converged"]


def test_make_field_families():
    assert make_field({"family": "lambda-E", "lambda": "quadratic"}).symmetry == "symmetric"
    assert make_field({"family": "potential", "lambda": "gauss", "a": 2.0}).symmetry == "skew-hermitian"
    f = make_field({"family": "gauss-poly", "epsilon": 0.1}, seed=1)
    g = make_field({"family": "gauss-poly"}, seed=1)
    x = np.zeros((1, 3))
    assert np.allclose(f(x), 0.1 * g(x))
