import csv
import hashlib
import json
import math
import subprocess
import sys

import pytest

from kppflow.cli import main, reproduce_all, run_config
from kppflow.config import ConfigError, amplitude_list, validate_config

SHEAR = {"type": "shear", "resolution": 32}


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_diffusivity_run(tmp_path):
    out = tmp_path / "out"
    cfg = {"mode": "diffusivity", "flow": SHEAR, "amplitudes": [1, 10, 100], "output_dir": str(out)}
    assert run_config(write_config(tmp_path, cfg)) == 0
    rows = list(csv.DictReader(open(out / "diffusivity.csv")))
    ratio = [float(r["D_e_over_A2"]) for r in rows]
    assert abs(ratio[-1] - 1 / (8 * math.pi**2)) < 1e-4
    assert ratio == sorted(ratio, reverse=True)
    man = read_manifest(out)
    assert man["config"]["mode"] == "diffusivity"
    assert {"kppflow", "numpy", "scipy", "python"} <= set(man["versions"])
    for entry in man["files"]:
        data = (out / entry["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
    assert (out / "plots" / "index.json").exists()


def test_deterministic_csv(tmp_path):
    texts = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        cfg = {"mode": "speed", "flow": SHEAR, "amplitudes": [4, 8], "output_dir": str(out), "seed": 3}
        assert run_config(write_config(tmp_path, cfg, f"c{k}.json")) == 0
        texts.append((out / "speed.csv").read_text())
    assert texts[0] == texts[1]
    # 17 significant digits in every numeric field
    value = texts[0].splitlines()[1].split(",")[1]
    assert len(value.replace(".", "").replace("-", "").split("e")[0].lstrip("0")) == 17


def test_limits_run(tmp_path):
    out = tmp_path / "lim"
    cfg = {"mode": "limits", "flow": SHEAR, "lambda_grid": [0, 1, 2], "output_dir": str(out)}
    assert run_config(write_config(tmp_path, cfg)) == 0
    data = json.loads((out / "limits.json").read_text())
    assert abs(data["diffusivity_limit"] - 1 / (8 * math.pi**2)) < 1e-12


def test_validate_mode_cellular(tmp_path, capsys):
    cfg = {"mode": "validate", "flow": {"type": "cellular", "resolution": 32}, "output_dir": str(tmp_path / "v")}
    assert run_config(write_config(tmp_path, cfg)) == 0
    assert main(["validate", str(write_config(tmp_path, cfg, "v.json"))]) == 0


def test_bad_range_names_field(tmp_path, capsys):
    cfg = {"mode": "diffusivity", "flow": SHEAR, "amplitudes": {"lo": 10, "hi": 1, "num": 3}}
    assert run_config(write_config(tmp_path, cfg)) == 2
    assert "amplitudes.lo" in capsys.readouterr().err


@pytest.mark.parametrize("cfg, field", [
    ({"mode": "speed", "flow": SHEAR}, "amplitudes"),
    ({"mode": "speed", "flow": SHEAR, "amplitudes": [1], "tolerances": {"cell": -1}}, "tolerances.cell"),
    ({"mode": "nope"}, "mode"),
    ({"mode": "speed", "flow": SHEAR, "amplitudes": [1], "direction": [1, 1]}, "direction"),
])
def test_config_errors(cfg, field):
    with pytest.raises(ConfigError) as info:
        validate_config(cfg)
    assert info.value.field == field


def test_amplitude_ranges():
    assert amplitude_list({"lo": 1, "hi": 100, "num": 3}) == pytest.approx([1, 10, 100])
    assert amplitude_list({"lo": 1, "hi": 3, "num": 3, "spacing": "linear"}) == [1, 2, 3]


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = {"mode": "validate", "flow": SHEAR, "output_dir": str(blocker / "sub")}
    assert run_config(write_config(tmp_path, cfg)) == 3
    assert reproduce_all(blocker / "sub", fast=True, resolution=16) == 3


def test_missing_config_file(tmp_path):
    assert run_config(tmp_path / "absent.json") == 3


def test_solver_failure_leaves_marker(tmp_path):
    out = tmp_path / "fail"
    cfg = {"mode": "diffusivity", "flow": {"type": "cellular", "resolution": 16}, "amplitudes": [1, 2],
           "tolerances": {"cell": 1e-30}, "output_dir": str(out)}
    assert run_config(write_config(tmp_path, cfg)) == 1
    assert (out / "FAILED").exists() and (out / "manifest.json").exists()


def test_low_resolution_reproduce_skips(tmp_path):
    out = tmp_path / "rep"
    code = reproduce_all(out, fast=True, resolution=16)
    rows = list(csv.DictReader(open(out / "acceptance.csv")))
    status = {int(r["criterion"]): r["status"] for r in rows}
    assert len(status) == 10
    assert all(status[n] == "SKIPPED" for n in (2, 4, 5, 6, 7, 8))
    assert all(status[n] == "PASS" for n in (1, 3, 9, 10))
    assert code == 0


def test_console_entry_point(tmp_path):
    cfg = write_config(tmp_path, {"mode": "validate", "flow": SHEAR})
    proc = subprocess.run([sys.executable, "-m", "kppflow.cli", "validate", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and '"config": "ok"' in proc.stdout
