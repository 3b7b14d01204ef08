import json
import subprocess
import sys

import pytest

from curvlab import gallery
from curvlab.cli import main
from curvlab.config import build_config
from curvlab.runner import run

QUICK = {"samples": 10, "inequality_samples": 2, "resolution": 16, "restarts": 4,
         "oracle_draws": 200, "ambient_samples": 2}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def _quick(entry):
    cfg = gallery.config(entry)
    cfg["settings"] = dict(QUICK)
    return cfg


def test_gallery_writes_loadable_files(tmp_path, capsys):
    assert main(["gallery", str(tmp_path)]) == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert "suite.json" in files and len(files) == len(gallery.ENTRIES) + 1
    for p in tmp_path.iterdir():
        assert main(["validate", str(p)]) == 0
    assert "ok" in capsys.readouterr().out


def test_run_passes_and_writes_report(tmp_path, capsys):
    cfg = _write(tmp_path, _quick("flat_t2"))
    out = tmp_path / "rep" / "report.json"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["passed"] and len(rep["checks"]) == 2
    assert {"version", "config_digest", "seed", "settings", "timings"} <= set(rep)
    assert "2/2 checks passed" in capsys.readouterr().out


def test_quiet_run_prints_json(tmp_path, capsys):
    cfg = _write(tmp_path, _quick("flat_t2"))
    assert main(["run", str(cfg), "--quiet"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"]


def test_swap_control_fails_with_exit_one(tmp_path):
    cfg = _quick("torus_in_r3")
    cfg["checks"] = [{"id": "INEQ-D", "target": "torus_in_r3", "swap": True}]
    assert main(["run", str(_write(tmp_path, cfg)), "--quiet", "--out",
                 str(tmp_path / "r.json")]) == 1


@pytest.mark.parametrize("mutate", [
    lambda c: c.update(settings={"samples": 0}),
    lambda c: c.update(bogus=1),
    lambda c: c["checks"].append({"id": "WAL2", "target": "missing"}),
    lambda c: c["manifolds"][0].update(metric=["1", "sin(x1"]),
    lambda c: c["checks"].append({"id": "IF3", "target": "flat_t2",
                                  "distributions": ["t2_e1", "t2_e2"]}),
])
def test_bad_config_exits_two(tmp_path, mutate, capsys):
    cfg = _quick("flat_t2")
    mutate(cfg)
    p = _write(tmp_path, cfg)
    assert main(["validate", str(p)]) == 2 or main(["run", str(p), "--quiet"]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unreadable_and_malformed_config(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "absent.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{\"manifolds\": [")
    assert main(["run", str(bad)]) == 2
    assert "bad.json:1" in capsys.readouterr().err


def test_engine_error_exits_three(tmp_path):
    cfg = gallery.config("flat_t2")
    cfg["distributions"].append({"name": "vanish", "manifold": "flat_t2",
                                 "fields": [["sin(x1)", "0"]]})
    cfg["invariants"] = [{"manifold": "flat_t2", "point": [0.0, 1.0], "partition": [1, 1],
                          "kind": "delta_plus_m", "distributions": ["vanish", "t2_e2"]}]
    cfg["checks"] = []
    assert main(["run", str(_write(tmp_path, cfg)), "--quiet", "--out",
                 str(tmp_path / "r.json")]) == 3


def test_invariant_verb(capsys):
    assert main(["invariant", "sphere_s3", "1.0,1.2,0.5", "1,1", "delta_plus_m"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["value"] == pytest.approx(1.0, abs=1e-8)
    assert main(["invariant", "sphere_s3", "1.0,1.2", "1,1", "delta_plus_m"]) == 2
    assert main(["invariant", "sphere_s3", "0.0,1.2,0.5", "1,1", "delta_plus_m"]) == 2


def test_seed_precedence(tmp_path, monkeypatch):
    raw = _quick("flat_t2")
    assert build_config(raw, env={"CURVLAB_SEED": "7"}).settings.seed == 7
    raw["settings"]["seed"] = 3
    assert build_config(raw, env={"CURVLAB_SEED": "7"}).settings.seed == 3
    monkeypatch.setenv("CURVLAB_SEED", "11")
    out = tmp_path / "r.json"
    del raw["settings"]["seed"]
    p = _write(tmp_path, raw)
    main(["run", str(p), "--quiet", "--out", str(out)])
    assert json.loads(out.read_text())["seed"] == 11
    main(["run", str(p), "--quiet", "--out", str(out), "--seed", "5"])
    assert json.loads(out.read_text())["seed"] == 5


def test_report_independent_of_jobs():
    raw = gallery.suite(["warped_torus", "sphere_in_r3"])
    raw["settings"] = dict(QUICK)
    cfg = build_config(raw, env={})
    one = run(cfg, jobs=1)
    two = run(cfg, jobs=2)
    assert one.body_json() == two.body_json()
    assert one.timings["workers"] == 1 and two.timings["workers"] == 2


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "curvlab.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("curvlab ")
