import json
import subprocess
import sys

import pytest

from beamctl.cli import main

BEAM = ["--alpha", "0.5", "--rho", "1", "--modes", "6"]


@pytest.fixture
def ic(tmp_path):
    path = tmp_path / "ic.csv"
    path.write_text("n,u0,u1\n1,1,0\n")
    return path


def _synth(tmp_path, ic, name="c.csv", extra=()):
    out = tmp_path / name
    code = main(["synthesize", *BEAM, "--ic", str(ic), "--T", "1", "--out", str(out), *extra])
    return code, out


def test_synthesize_then_verify(tmp_path, ic, capsys):
    code, out = _synth(tmp_path, ic)
    assert code == 0
    assert out.read_text().splitlines()[0] == "t,f1,f2"
    man = json.loads(out.with_suffix(".json").read_text())
    assert man["regime"] == "OneDim" and man["params"]["n_modes"] == 6
    capsys.readouterr()
    report = tmp_path / "v.json"
    assert main(["verify", "--control", str(out), "--ic", str(ic), "--out", str(report)]) == 0
    res = json.loads(report.read_text())
    assert res["pass"] and res["relative_energy"] <= 1e-6


def test_synthesize_is_deterministic(tmp_path, ic):
    _, a = _synth(tmp_path, ic, "a.csv")
    _, b = _synth(tmp_path, ic, "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_verify_detects_wrong_state(tmp_path, ic, capsys):
    _, out = _synth(tmp_path, ic)
    other = tmp_path / "other.csv"
    other.write_text("n,u0,u1\n2,1,0\n")
    capsys.readouterr()
    assert main(["verify", "--control", str(out), "--ic", str(other)]) == 4
    assert json.loads(capsys.readouterr().err)["error"] == "VerificationFailed"


def test_spectrum_weak_regime(capsys):
    assert main(["spectrum", "--alpha", "1.6", "--rho", "1", "--modes", "4"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["regime"]["regime"] == "WeakOnly"
    assert len(out["frequency_set"]["entries"]) == 8


def test_clusters_coincidence(capsys):
    assert main(["clusters", "--alpha", "1", "--rho", str(13 / 6), "--modes", "4", "--epsilon", "1e-6"]) == 0
    assert json.loads(capsys.readouterr().out)["pairs"] == [[3, 2]]


def test_angles_full_interval(tmp_path, capsys):
    out = tmp_path / "angles.csv"
    assert main(["angles", "--a", "0", "--b", "3.141592653589793", "--max", "5", "--out", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["max_cos"] <= 1e-12
    assert len(out.read_text().splitlines()) == 1 + 10


def test_bad_alpha_exit_2(capsys):
    assert main(["spectrum", "--alpha", "3", "--rho", "1"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"


def test_missing_ic_exit_2(tmp_path):
    assert main(["synthesize", *BEAM, "--ic", str(tmp_path / "nope.csv"), "--T", "1",
                 "--out", str(tmp_path / "c.csv")]) == 2


def test_forced_1d_in_weak_regime_exit_3(tmp_path, ic):
    code = main(["synthesize", "--alpha", "1.6", "--rho", "1", "--modes", "4", "--ic", str(ic), "--T", "1",
                 "--force", "1d", "--out", str(tmp_path / "c.csv")])
    assert code == 3


def test_interior_roundtrip(tmp_path, ic):
    code, out = _synth(tmp_path, ic, extra=["--interval", "1", "2"])
    assert code == 0
    assert out.read_text().splitlines()[0] == "t,x,f"
    assert main(["verify", "--control", str(out), "--ic", str(ic), "--tol", "1e-4"]) == 0


def test_cost_sweep(tmp_path, capsys):
    out = tmp_path / "cost.csv"
    assert main(["cost-sweep", "--alpha", "0.5", "--rho", "1", "--modes", "4", "--T-list", "1", "0.5",
                 "--out", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["monotone"]
    assert len(out.read_text().splitlines()) == 3


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "beamctl", "spectrum", "--alpha", "0.5", "--rho", "1",
                           "--modes", "2"], capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["regime"]["regime"] == "OneDim"
