import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from embedspec import config
from embedspec.cli import main

BASE = {
    "schema": "embedspec/1",
    "potential": {"kind": "zero"},
    "targets": [{"k": 1.0, "n": 1, "xi": 0.5}],
    "run": {"x_max": 1000.0},
    "verify": {"probes": 3},
    "lemmas": {"osc1": 3, "osc2": 3, "periodic": 3, "nonresonant": 1},
}


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if isinstance(doc, dict) else doc)
    return str(p)


def run(tmp_path, command, doc=BASE, *extra, out="out"):
    args = [command, *extra, "--out", str(tmp_path / out)]
    if doc is not None:
        args += ["--config", write_cfg(tmp_path, doc)]
    return main(args)


def load(tmp_path, name, out="out"):
    return json.loads((tmp_path / out / name).read_text())


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert run(d, "synth") == 0
    return d


# --- config -----------------------------------------------------------------------

def test_config_defaults():
    cfg = config.parse_config({"schema": "embedspec/1", "potential": {"kind": "cosine",
                                                                      "amplitude": 2.0}})
    assert cfg.mode == "practical" and cfg.x_max == 1e4 and cfg.n_max == 3
    assert cfg.potential.A == pytest.approx(4 / math.pi)


@pytest.mark.parametrize("patch,field", [
    ({"schema": "embedspec/0"}, "schema"),
    ({"targets": [{"k": 4.0, "n": 1}]}, "targets[0].k"),
    ({"targets": [{"k": 1.0, "n": 0}]}, "targets[0].n"),
    ({"targets": [{"k": 1.0}]}, "targets[0].n"),
    ({"targets": [{"k": 1.0, "n": 1, "phase": 0}]}, "targets[0].phase"),
    ({"run": {"x_max": -1}}, "run.x_max"),
    ({"run": {"tolerances": {"rtol": 1.0}}}, "run.tolerances.rtol"),
    ({"mode": {"mode": "fast"}}, "mode.mode"),
    ({"h": {"kind": "power", "p": 1.5}}, "h.p"),
    ({"potential": {"kind": "square"}}, "potential.kind"),
    ({"extras": {}}, "extras"),
    ({"verify": {"tail_fraction": 1.0}}, "verify.tail_fraction"),
])
def test_config_errors_name_field(patch, field):
    with pytest.raises(config.ConfigError) as exc:
        config.parse_config({**BASE, **patch})
    assert exc.value.field == field
    assert str(exc.value).startswith(field)


def test_config_syntax_error_position():
    with pytest.raises(config.ConfigError) as exc:
        config.loads('{\n  "schema": "embedspec/1",\n  "potential": }')
    assert exc.value.line == 3 and "line 3" in str(exc.value)


def test_h_presets_parse():
    cfg = config.parse_config({**BASE, "h": {"kind": "custom-table", "xs": [0, 1], "vs": [1, 2]}})
    assert cfg.h.kind == "table"
    assert config.parse_config({**BASE, "h": {"kind": "log", "c": 3}}).h.c == 3.0


# --- commands ---------------------------------------------------------------------

def test_malformed_config_exit_2(tmp_path, capsys):
    assert run(tmp_path, "bands", {**BASE, "run": {"grid_step": "fine"}}) == 2
    assert "run.grid_step" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["bands", "--out", str(tmp_path)]) == 2


def test_bands_free(tmp_path):
    assert run(tmp_path, "bands") == 0
    bands = load(tmp_path, "bands.json")["bands"]
    assert [b["lower"] for b in bands] == pytest.approx([0.0, math.pi**2, 4 * math.pi**2], abs=1e-7)
    assert (tmp_path / "out" / "bands.dat").exists()


def test_bands_cosine_gap(tmp_path):
    assert run(tmp_path, "bands", {**BASE, "potential": {"kind": "cosine", "amplitude": 2.0}}) == 0
    b = load(tmp_path, "bands.json")["bands"]
    assert b[1]["lower"] - b[0]["upper"] > 1e-3


def test_eigen_within_bound(tmp_path):
    doc = {**BASE, "potential": {"kind": "cosine", "amplitude": 2.0},
           "targets": [{"k": math.pi / 2, "n": 20}], "bands": {"n_max": 20}}
    assert run(tmp_path, "eigen", doc) == 0
    row = load(tmp_path, "eigen.json")["eigenvalues"][0]
    assert row["within_bound"] is True


def test_eigen_band_above_n_max(tmp_path, capsys):
    assert run(tmp_path, "eigen", {**BASE, "targets": [{"k": 1.0, "n": 5}]}) == 2
    assert "targets[0].n" in capsys.readouterr().err


def test_synth_outputs(synth_dir):
    rep = load(synth_dir, "synth.json")
    assert rep["synthesized"] and rep["envelope_holds"]
    assert rep["decay"][0]["l2_verdict"]
    assert rep["decay"][0]["predicted_slope"] == pytest.approx(-1.0)
    for name in ("plan.json", "potential.csv", "trajectory.json", "trajectory.dat"):
        assert (synth_dir / "out" / name).exists()


def test_synth_pair_both_decay(tmp_path):
    doc = {**BASE, "targets": [{"k": 1.0, "n": 1}, {"k": math.pi - 1.0, "n": 1}],
           "run": {"x_max": 1000.0, "grid_step": 0.02}}
    assert run(tmp_path, "synth", doc) == 0
    rep = load(tmp_path, "synth.json")
    assert all(d["slope"] < -0.5 for d in rep["decay"])


def test_synth_s3_failure_exit_3(tmp_path, capsys):
    doc = {**BASE, "potential": {"kind": "cosine", "amplitude": 2.0},
           "targets": [{"k": 1.0, "n": 2}, {"k": 1.0, "n": 3}], "bands": {"n_max": 3}}
    assert run(tmp_path, "synth", doc) == 3
    assert "A1 violation" in capsys.readouterr().err


def test_synth_paper_mode_skips_long_tail(tmp_path):
    assert run(tmp_path, "synth", BASE, "--mode", "paper") == 0
    rep = load(tmp_path, "synth.json")
    assert not rep["synthesized"] and "skipped" in rep["note"]
    plan = load(tmp_path, "plan.json")["plan"]
    assert plan["mode"] == "paper_faithful"


def test_synth_deterministic(synth_dir, tmp_path):
    assert run(tmp_path, "synth") == 0
    for name in ("plan.json", "synth.json", "potential.csv"):
        assert (tmp_path / "out" / name).read_bytes() == (synth_dir / "out" / name).read_bytes()


def test_verify_structured_round_trip(synth_dir, tmp_path):
    traj = str(synth_dir / "out" / "trajectory.json")
    assert run(tmp_path, "verify", BASE, traj) == 0
    rep = load(tmp_path, "verify.json")
    assert rep["targets"][0]["l2_verdict"]
    assert not any(p["l2_verdict"] for p in rep["probes"])
    assert rep["passed"]


def test_verify_csv_round_trip(synth_dir, tmp_path):
    csv = str(synth_dir / "out" / "potential.csv")
    assert run(tmp_path, "verify", BASE, csv) == 0
    rep = load(tmp_path, "verify.json")
    assert rep["activation"] == pytest.approx(50.0, abs=0.05)
    assert rep["targets"][0]["slope"] == pytest.approx(-1.0, abs=0.1)


def test_verify_zero_potential_all_false(tmp_path):
    p = tmp_path / "zero.csv"
    xs = np.linspace(0.0, 1000.0, 201)
    p.write_text("x,V\n" + "".join(f"{x:.17g},0\n" for x in xs))
    assert run(tmp_path, "verify", BASE, str(p)) == 5
    rep = load(tmp_path, "verify.json")
    assert not any(t["l2_verdict"] for t in rep["targets"] + rep["probes"])


def test_verify_corrupted_csv_row(synth_dir, tmp_path, capsys):
    lines = (synth_dir / "out" / "potential.csv").read_text().splitlines()
    lines[41] = "17.3,abc"
    p = tmp_path / "bad.csv"
    p.write_text("\n".join(lines) + "\n")
    assert run(tmp_path, "verify", BASE, str(p)) == 2
    assert "line 42" in capsys.readouterr().err


def test_verify_needs_file(tmp_path):
    assert run(tmp_path, "verify", BASE) == 2
    assert run(tmp_path, "verify", BASE, str(tmp_path / "absent.csv")) == 2


def test_lemmas_pass_and_deterministic(tmp_path):
    assert run(tmp_path, "lemmas", BASE, "--seed", "4") == 0
    first = (tmp_path / "out" / "lemmas.json").read_bytes()
    assert run(tmp_path, "lemmas", BASE, "--seed", "4", out="again") == 0
    assert (tmp_path / "again" / "lemmas.json").read_bytes() == first
    rep = json.loads(first)
    assert rep["passed"] and rep["half_period_envelope"]["passed"]
    assert rep["summary"]["L4_1"]["count"] == 3


@pytest.mark.skipif(shutil.which("embedspec") is None, reason="console script not installed")
def test_console_script_help():
    res = subprocess.run(["embedspec", "--help"], capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and "bands" in res.stdout
