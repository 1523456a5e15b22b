import json
import subprocess
import sys

import pytest

from polyrecon.cli import main

BASILICA = "[-1, 0, 1]"
DIRAC = "[[0, -2], 0, [0, -1]]"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", "--coeffs", "[[0, 0], [0, 0], [0, 1]]")
    assert code == 0
    rep = json.loads(out)
    assert rep["result"]["kind"] == "StronglyExceptional"
    assert rep["result"]["invariant_lines"] == [0.0]
    assert rep["config"]["polynomial"]["coeffs"] == [[0.0, 0.0], [0.0, 0.0], [0.0, 1.0]]
    assert "version" in rep


def test_input_errors(capsys, tmp_path):
    assert run(capsys, "classify", "--coeffs", "{oops")[0] == 2
    assert run(capsys, "classify", "--coeffs", "[1, 2]")[0] == 2
    assert run(capsys, "classify")[0] == 2
    assert run(capsys, "classify", "--poly", str(tmp_path / "missing.json"))[0] == 2
    assert run(capsys, "entropy", "--coeffs", BASILICA)[0] == 2  # seed required
    assert run(capsys, "julia", "--coeffs", BASILICA, "--seed", "0", "--samples", "-5")[0] == 2
    assert run(capsys, "nonsense")[0] == 2
    bad = tmp_path / "cfg.json"
    bad.write_text("{")
    assert run(capsys, "classify", "--coeffs", BASILICA, "--config", str(bad))[0] == 2


def test_config_file_with_flag_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"coeffs": BASILICA, "samples": 50, "seed": 3}))
    code, out, _ = run(capsys, "julia", "--config", str(cfg), "--samples", "20")
    assert code == 0
    assert len(out.strip().splitlines()) == 21


def test_entropy_report(capsys, tmp_path):
    args = ["entropy", "--coeffs", BASILICA, "--seed", "1", "--samples", "20000", "--n-range", "3,8"]
    code, out, _ = run(capsys, *args, "--out", str(tmp_path))
    assert code == 0
    rep = json.loads(out)
    assert rep["result"]["bowen"]["method"] == "BowenBall"
    assert rep["result"]["dirac"] is False
    assert (tmp_path / "entropy.json").read_text() == out
    assert (tmp_path / "measure.csv").read_text().startswith("re,im,weight\n")
    assert "out" not in rep["config"] and "threads" not in rep["config"]


def test_entropy_is_byte_identical_across_runs_and_threads(capsys):
    args = ["entropy", "--coeffs", BASILICA, "--seed", "4", "--samples", "20000", "--n-range", "3,8"]
    a = run(capsys, *args)[1]
    b = run(capsys, *args)[1]
    c = run(capsys, *args, "--threads", "2")[1]
    assert a == b == c


def test_entropy_flags_dirac(capsys):
    code, out, _ = run(capsys, "entropy", "--coeffs", DIRAC, "--seed", "1", "--samples", "20000")
    rep = json.loads(out)["result"]
    assert code == 0 and rep["dirac"] is True
    assert rep["bowen"]["value"] < 0.05 and rep["partition"]["value"] < 0.05


def test_mirrors(capsys, tmp_path):
    code, out, _ = run(capsys, "mirrors", "--coeffs", "[[1, 0], 0, [1, 1]]", "--out", str(tmp_path))
    assert code == 0
    rep = json.loads(out)["result"]
    assert rep["N_hat"] >= 1 and rep["M_hat"] == 1
    assert rep["unbroken_pairs"] == []
    head = (tmp_path / "mirrors.csv").read_text().splitlines()[0]
    assert head == "z_re,z_im,w_re,w_im,prefix_len,break_time"


def test_tau_generic_and_dirac(capsys):
    code, out, _ = run(capsys, "tau", "--coeffs", "[[0.3, 0.2], [0, 0.1], [1, 0.5]]", "--seed", "0", "--samples", "20", "--M", "1")
    rep = json.loads(out)["result"]
    assert code == 0 and rep["ambiguous"] == 0 and rep["max_error"] < 1e-6
    assert rep["preimage_counts"] == {"1": 20}
    code, out, err = run(capsys, "tau", "--coeffs", DIRAC, "--seed", "0", "--samples", "10", "--M", "1")
    assert code == 4 and "ambiguous" in err
    assert json.loads(out)["result"]["preimage_counts"] == {"-1": 10}
    assert run(capsys, "tau", "--coeffs", BASILICA, "--seed", "0", "--M", "5", "--n-window", "2")[0] == 2


def test_cantor(capsys):
    code, out, _ = run(capsys, "cantor", "--d", "2", "--c", "1e4", "--seed", "0", "--pairs", "1000")
    rep = json.loads(out)["result"]
    assert code == 0
    assert rep["escape"]["pass"] and rep["projection_gap"] > 0 and rep["no_mirror"]["pass"]


def test_cantor_small_c_fails_certificate(capsys):
    code, out, err = run(capsys, "cantor", "--d", "2", "--c", "1.5", "--seed", "0")
    assert code == 5
    assert json.loads(out)["failed"] == "make_spec"
    assert "make_spec" in err


def test_cantor_overlapping_projections(capsys):
    code, out, _ = run(capsys, "cantor", "--d", "3", "--c", "10", "--seed", "0")
    assert code == 5
    assert json.loads(out)["failed"] in ("escape", "projection")


def test_julia_csv(capsys, tmp_path):
    code, out, _ = run(capsys, "julia", "--coeffs", BASILICA, "--seed", "0", "--samples", "10")
    assert code == 0 and out.splitlines()[0] == "re,im" and len(out.splitlines()) == 11
    run(capsys, "julia", "--coeffs", BASILICA, "--seed", "0", "--samples", "10", "--out", str(tmp_path))
    assert (tmp_path / "julia.csv").read_text() == out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "polyrecon", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("polyrecon ")
