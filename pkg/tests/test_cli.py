import json
from pathlib import Path

import pytest
import yaml

from stiffhs import cli
from stiffhs.errors import NumericalError
from stiffhs.io import verify_manifest

SMALL = {"name": "small", "geometry": "radial", "n": 2, "omega0": {"kind": "ball", "radius": 1.0},
         "growth": {"form": "linear", "g0": 1.0, "p_max": 1.0}, "m_list": [10, 20, 40],
         "dx": 0.05, "horizon": 0.05, "output_count": 3}


def _config(tmp_path, **over):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(dict(SMALL, **over)))
    return path


def _run(*args):
    return cli.main([str(a) for a in args])


def _only_dir(out):
    dirs = [p for p in Path(out).iterdir() if p.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


def test_pme_run_outputs(tmp_path):
    assert _run("pme-run", "--config", _config(tmp_path), "--out", tmp_path / "o", "--m-list", "10,20") == 0
    d = _only_dir(tmp_path / "o")
    assert d.name.endswith("-pme-run")
    names = sorted(p.name for p in d.iterdir())
    assert names == ["diagnostics_m10.csv", "diagnostics_m20.csv", "manifest.json", "mass_balance.csv",
                     "scenario.json", "snapshots_m10.csv", "snapshots_m20.csv"]
    head = (d / "snapshots_m10.csv").read_text().splitlines()[0]
    assert head == "t,cell,r,rho,p"
    assert (d / "diagnostics_m10.csv").read_text().startswith(
        "t,mass,max_p,support_radius,ab_min,exterior_error\n")
    assert verify_manifest(d) == []
    man = json.loads((d / "manifest.json").read_text())
    assert man["command"] == "pme-run" and man["scenario_hash"] in d.name


def test_determinism(tmp_path):
    cfg = _config(tmp_path)
    for out in ("a", "b"):
        assert _run("pme-run", "--config", cfg, "--out", tmp_path / out) == 0
    da, db = _only_dir(tmp_path / "a"), _only_dir(tmp_path / "b")
    for f in sorted(da.glob("*.csv")):
        assert f.read_bytes() == (db / f.name).read_bytes()


def test_m_not_above_one_is_validation_failure(tmp_path):
    assert _run("pme-run", "--config", _config(tmp_path), "--out", tmp_path / "o", "--m-list", "1") == 2
    assert not (tmp_path / "o").exists() or not any((tmp_path / "o").iterdir())


def test_bad_inputs(tmp_path):
    assert _run("pme-run", "--config", tmp_path / "missing.yaml", "--out", tmp_path) == 2
    assert _run("launch", "--config", _config(tmp_path), "--out", tmp_path) == 2
    assert _run("pme-run", "--config", _config(tmp_path, typo=1), "--out", tmp_path) == 2
    assert _run("pme-run", "--config", _config(tmp_path), "--out", tmp_path, "--m-list", "a,b") == 2
    assert _run("pme-run", "--config", _config(tmp_path), "--out", tmp_path, "--threads", "0") == 2


def test_numerical_failure_removes_outputs(tmp_path, monkeypatch):
    def boom(scenario, m):
        raise NumericalError("synthetic")

    monkeypatch.setattr(cli, "_pme_one", boom)
    out = tmp_path / "o"
    assert _run("pme-run", "--config", _config(tmp_path), "--out", out) == 3
    assert list(out.iterdir()) == []


def test_front_run(tmp_path):
    cfg = _config(tmp_path, growth={"form": "constant-test", "g0": 1.0})
    assert _run("front-run", "--config", cfg, "--out", tmp_path / "o") == 0
    d = _only_dir(tmp_path / "o")
    assert (d / "front.csv").read_text().startswith(
        "t,component,left,right,grad_left,grad_right,g_left,g_right,event\n")


def test_barriers_all_pass(tmp_path):
    assert _run("barriers", "--config", _config(tmp_path), "--out", tmp_path / "o") == 0
    rep = json.loads((_only_dir(tmp_path / "o") / "barrier_report.json").read_text())
    assert rep["all_pass"] and rep["negative_controls_fail"]
    assert set(rep["checks"]) == {"WT_super", "expanding_sub", "decay_super"}


def test_sweep(tmp_path):
    cfg = _config(tmp_path, growth={"form": "constant-test", "g0": 1.0})
    assert _run("sweep", "--config", cfg, "--out", tmp_path / "o") == 0
    d = _only_dir(tmp_path / "o")
    rep = json.loads((d / "sweep_report.json").read_text())
    assert rep["metadata"]["m_list"] == [10.0, 20.0, 40.0]
    rows = (d / "errors.csv").read_text().splitlines()
    assert len(rows) == 1 + 3 * 3


def test_contraction_and_perimeter(tmp_path):
    cfg = _config(tmp_path)
    assert _run("contraction", "--config", cfg, "--out", tmp_path / "c", "--m-list", "40") == 0
    rep = json.loads((_only_dir(tmp_path / "c") / "contraction_report.json").read_text())
    assert rep["per_m"]["40"]["max_ratio"] <= 1.01 and rep["per_m"]["40"]["ordered"]
    assert _run("perimeter", "--config", cfg, "--out", tmp_path / "p", "--m-list", "40") == 0
    lines = (_only_dir(tmp_path / "p") / "perimeter.csv").read_text().splitlines()
    assert lines[0] == "m,t,perimeter,reference_perimeter,band_area" and len(lines) == 4


def test_threads_match_serial(tmp_path):
    cfg = _config(tmp_path)
    assert _run("pme-run", "--config", cfg, "--out", tmp_path / "s") == 0
    assert _run("pme-run", "--config", cfg, "--out", tmp_path / "t", "--threads", "2") == 0
    a, b = _only_dir(tmp_path / "s"), _only_dir(tmp_path / "t")
    for f in sorted(a.glob("*.csv")):
        assert f.read_bytes() == (b / f.name).read_bytes()


@pytest.mark.parametrize("name", ["barenblatt_1d", "front_closed_form", "barriers", "nucleation"])
def test_shipped_scenarios_parse(scenario_dir, name):
    from stiffhs.config import parse_scenario
    parse_scenario(Path(scenario_dir) / f"{name}.yaml")
