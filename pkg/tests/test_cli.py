import csv
import json

import numpy as np
import pytest

import hsc.dispersion
from hsc import spectral
from hsc.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_FILESYSTEM, EXIT_OK, main

P0 = "alpha_i = 1\nalpha_o = 2\ngamma_i = 0\ngamma_o = 1\nsigma = 1\nR = 2\n"


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_dispersion_command(tmp_path):
    cfg = write_cfg(tmp_path, P0 + "n_max = 8\n")
    assert main(["dispersion", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    with (tmp_path / "dispersion.csv").open() as fh:
        rows = {int(r["n"]): r for r in csv.DictReader(fh)}
    assert set(rows) == {*range(-8, 0), *range(1, 9)}
    assert float(rows[1]["re_q"]) == pytest.approx(-6 / 13, rel=1e-15)
    assert len(rows[1]["re_q"].lstrip("-").replace(".", "").lstrip("0")) >= 16
    meta = json.loads((tmp_path / "dispersion.json").read_text())
    assert meta["verdict"] == "Stable"


def test_dispersion_n_max_flag(tmp_path, capsys):
    cfg = write_cfg(tmp_path, P0)
    assert main(["dispersion", "--config", str(cfg), "--out", str(tmp_path), "--n-max", "3", "--quiet"]) == EXIT_OK
    assert len((tmp_path / "dispersion.csv").read_text().splitlines()) == 7
    assert main(["dispersion", "--config", str(cfg), "--out", str(tmp_path), "--n-max", "0"]) == EXIT_CONFIG
    assert "n_max" in capsys.readouterr().err


def test_unstable_verdict(tmp_path):
    cfg = write_cfg(tmp_path, "eta_i = 1\neta_o = 1\nrho_i = 2\nrho_o = 1\nb = 1\nomega = 1\nsigma = 1\nR = 2\n")
    assert main(["dispersion", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    assert json.loads((tmp_path / "dispersion.json").read_text())["verdict"] == "Unstable"


def test_simulate_zero_is_flat(tmp_path):
    cfg = write_cfg(tmp_path, P0 + "N = 16\nM = 16\ndt = 0.05\nt_end = 0.2\nsnapshot_every = 1\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    with (tmp_path / "spectra.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 16 * 5
    assert all(float(r["re"]) == 0 and float(r["im"]) == 0 for r in rows)


def test_simulate_is_byte_reproducible(tmp_path):
    text = P0 + "beta_o = 1\nN = 16\nM = 16\ndt = 0.02\nt_end = 0.1\ninitial = random:0.01\nseed = 9\n"
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        out.mkdir()
        cfg = write_cfg(tmp_path, text + f"output_dir = {out}\n", f"run{k}.cfg")
        assert main(["simulate", "--config", str(cfg), "--quiet"]) == EXIT_OK
        outs.append((out / "spectra.csv").read_bytes())
    assert outs[0] == outs[1]
    manifest = json.loads((tmp_path / "run0" / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 9 and manifest["status"] == "completed"


def test_stable_simulation_decays(tmp_path):
    cfg = write_cfg(tmp_path, P0 + "N = 16\nM = 16\ndt = 0.01\nt_end = 0.2\ninitial = mode:2:1e-4\nsnapshot_every = 5\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    with (tmp_path / "spectra.csv").open() as fh:
        amp = [abs(complex(float(r["re"]), float(r["im"]))) for r in csv.DictReader(fh) if r["n"] == "2"]
    assert len(amp) == 5 and np.all(np.diff(amp) < 0)


def test_malformed_config_names_line(tmp_path, capsys):
    cfg = write_cfg(tmp_path, P0 + "N: 16\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "line 7" in capsys.readouterr().err


def test_missing_output_dir(tmp_path, capsys):
    cfg = write_cfg(tmp_path, P0)
    assert main(["dispersion", "--config", str(cfg), "--out", str(tmp_path / "nope")]) == EXIT_FILESYSTEM
    assert "does not exist" in capsys.readouterr().err
    assert main(["verify", "--criteria", "2", "--out", str(tmp_path / "nope")]) == EXIT_FILESYSTEM


def test_missing_config_file(tmp_path):
    assert main(["dispersion", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path)]) == EXIT_FILESYSTEM
    assert main(["dispersion", "--out", str(tmp_path)]) == EXIT_CONFIG


@pytest.mark.parametrize("problem", ["inner", "outer"])
def test_solve_elliptic(tmp_path, problem):
    th = spectral.nodes(16)
    (tmp_path / "g.csv").write_text("value\n" + "".join(f"{float(np.cos(2 * t))!r}\n" for t in th))
    text = P0 + f"N = 16\nM = 16\nshape = mode:2:0.05\nboundary_data = g.csv\nproblem = {problem}\n"
    cfg = write_cfg(tmp_path, text)
    assert main(["solve-elliptic", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    summary = json.loads((tmp_path / "elliptic.json").read_text())
    assert summary["problem"] == problem and summary["N"] == 16
    with (tmp_path / "flux.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 16 and float(rows[0]["boundary"]) == 1.0
    with (tmp_path / "field.csv").open() as fh:
        assert len(list(csv.DictReader(fh))) == 16 * summary["J"]


def test_verify_report(tmp_path, capsys):
    assert main(["verify", "--criteria", "1", "2", "9", "--out", str(tmp_path)]) == EXIT_OK
    printed = capsys.readouterr().out
    assert printed.count("[PASS]") == 3
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["passed"] and [c["number"] for c in report["criteria"]] == [1, 2, 9]
    assert (tmp_path / "verify.txt").read_text().strip() == printed.strip()


def test_verify_catches_a_perturbed_symbol(tmp_path, monkeypatch, capsys):
    good = hsc.dispersion.compute_l_n
    monkeypatch.setattr(hsc.dispersion, "compute_l_n", lambda c, n, R=None: good(c, n, R) * (1 + 1e-6))
    assert main(["verify", "--criteria", "1", "--out", str(tmp_path)]) == EXIT_FAILED
    assert "[FAIL] 1." in capsys.readouterr().out
    assert json.loads((tmp_path / "verify.json").read_text())["passed"] is False


def test_thread_cap(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, P0 + "n_max = 4\n")
    monkeypatch.setenv("HSC_THREADS", "1")
    assert main(["dispersion", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    monkeypatch.setenv("HSC_THREADS", "many")
    assert main(["dispersion", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_CONFIG
