import json
import subprocess
import sys
from pathlib import Path

import pytest

from fbshape.cli import main

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def test_oracle_prints_value(tmp_path, capsys):
    assert main(["oracle", "--quantity", "grad_v_bdry", "--out", str(tmp_path)]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.0625)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["schema"] == "fbshape/1" and manifest["command"] == "oracle"


def test_flow_serrin_from_sample(tmp_path):
    rc = main(["flow", "--problem", "serrin", "--k", "0.5", "--init", str(SAMPLES / "wobble.json"),
               "--tol", "1e-3", "--out", str(tmp_path)])
    assert rc == 0
    final = json.loads((tmp_path / "final_domain.json").read_text())
    assert final["a0"] == pytest.approx(1.0, abs=5e-3)
    assert (tmp_path / "history.csv").read_text().startswith("iter,residual,area,perimeter")


def test_verify_strict(tmp_path, capsys):
    rc = main(["verify", "--domain", str(SAMPLES / "disk.json"), "--convex", str(SAMPLES / "halfdisk.json"),
               "--k", "0.05", "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    entry = next(e for e in report["existence"]["entries"] if e["name"] == "flux_existence")
    assert entry["verdict"] == "strict"


def test_solve_writes_outputs(tmp_path):
    assert main(["solve", "--domain", str(SAMPLES / "disk.json"), "--h", "0.05", "--out", str(tmp_path)]) == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert {"nodes.csv", "tris.csv", "flux_u.csv", "field_z.csv", "solve.json", "manifest.json"} <= names


def test_cheeger_command(tmp_path):
    assert main(["cheeger", "--convex", str(SAMPLES / "unit_square.json"), "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "cheeger.json").read_text())
    assert res["h"] == pytest.approx(3.7724, abs=1e-3)


def test_cgnp_command(tmp_path):
    rc = main(["cgnp", "--domain", str(SAMPLES / "circle_1_5.json"), "--convex", str(SAMPLES / "unit_square.json"),
               "--out", str(tmp_path)])
    assert rc == 0


def test_derivcheck_command(tmp_path):
    rc = main(["derivcheck", "--seed", "3", "--functional", "VOL", "G_DIRICHLET", "--field-modes", "1",
               "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "derivcheck.csv").read_text().startswith("functional,field_mode,analytic,fd,rel_gap")


def test_identities_command(tmp_path):
    rc = main(["identities", "--seed", "1", "--field-modes", "1", "--h", "0.04", "--out", str(tmp_path)])
    assert rc == 0


@pytest.mark.parametrize("argv", [["bogus"], ["flow", "--problem", "serrin", "--k", "0.5", "--init", "missing.json"],
                                  ["oracle", "--quantity", "u"], []])
def test_bad_input_exits_one(tmp_path, argv):
    if argv and argv[0] != "bogus":
        argv = argv + ["--out", str(tmp_path)]
    proc = subprocess.run([sys.executable, "-m", "fbshape", *argv], capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 1
    assert proc.stderr


def test_verify_violation_exits_two(tmp_path):
    rc = main(["verify", "--convex", str(SAMPLES / "unit_square.json"), "--c", "1.0", "--out", str(tmp_path)])
    assert rc == 2
