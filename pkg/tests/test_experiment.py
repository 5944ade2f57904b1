import csv
import json

import numpy as np
import pytest

from cgmsfem import config as C
from cgmsfem.cli import main
from cgmsfem.experiment import evaluate, run_experiment, run_sweep, sweep_variant


def tiny(name="periodic-desk", **kw):
    cfg = C.preset(name)
    cfg.mesh.nx = cfg.mesh.ny = 8
    cfg.mesh.Nx = cfg.mesh.Ny = 2
    if cfg.material.source == "periodic":
        cfg.material.period = 4
    if cfg.material.source in ("kle", "random_phase"):
        for k in list(cfg.material.kle.values()) + [cfg.material.phase_kle]:
            k.terms = 10
            k.sigma = 1.0  # 10 of 64 modes at sigma 10 would give contrasts near e^24
    cfg.time.T, cfg.time.tau = 0.1, 0.05
    cfg.basis.L = [2, 4]
    cfg.write_vtk = False
    return C.validate(cfg.replace(**kw))


def _read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_zero_sources_give_zero_errors(tmp_path):
    cfg = tiny(write_vtk=True)
    cfg.sources = C.SourceConfig("zero", "zero", "zero")
    res = run_experiment(cfg, tmp_path)
    rows = _read(tmp_path / "errors.csv")
    assert len(rows) == 4
    assert all(float(r[k]) == 0.0 for r in rows for k in ("err_theta", "err_u", "err_w"))
    from cgmsfem.vtk import read_vtk
    for f in (tmp_path / "fields").glob("*.vtk"):
        assert all(np.all(v == 0) for v in read_vtk(f)[2].values())
    assert not res.failures


def test_runs_are_byte_identical(tmp_path):
    cfg = tiny()
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg.replace(workers=2), tmp_path / "b")
    for name in ("errors.csv", "errors_steps.csv", "eigenvalues.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    m = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert m["config_hash"] == cfg.digest()
    assert "numpy" in m["versions"]


def test_rows_per_method_and_columns(tmp_path):
    cfg = tiny()
    run_experiment(cfg, tmp_path)
    rows = _read(tmp_path / "errors.csv")
    assert [(r["method"], r["L"]) for r in rows] == [
        ("cgmsfem", "2"), ("cgmsfem", "4"), ("gmsfem", "2"), ("gmsfem", "4")]
    assert rows[0]["gamma1"] == "0.4" and rows[2]["gamma1"] == "0"
    assert rows[0]["wall_ms"] == ""


def test_single_value_sweep_matches_run(tmp_path):
    cfg = tiny()
    cfg.basis.L = [4]
    run_experiment(sweep_variant(cfg, "L", 4), tmp_path / "run")
    rows = run_sweep(cfg, "L", [4], tmp_path / "sweep")
    direct = _read(tmp_path / "run" / "errors.csv")
    swept = _read(tmp_path / "sweep" / "sweep.csv")
    assert [r["err_w"] for r in direct] == [r["err_w"] for r in swept]
    ratio = float(swept[0]["ratio_cgm_gm"])
    assert ratio == pytest.approx(float(direct[0]["err_w"]) / float(direct[1]["err_w"]), rel=1e-10)
    assert len(rows) == 2


def test_random_experiment_reports_samples_and_mean():
    cfg = tiny("test-b-desk", samples=3)
    cfg.basis.L = [4]
    res = evaluate(cfg)
    ids = [r[0] for r in res.rows]
    assert ids.count("test-b/s001") == 2 and ids.count("test-b/mean") == 2
    cgm = [r[8] for r in res.rows if r[1] == "cgmsfem" and r[0] != "test-b/mean"]
    assert res.mean_rows[0][8] == pytest.approx(np.mean(cgm))


def test_failed_sample_is_recorded(monkeypatch):
    import cgmsfem.experiment as E
    real = E.build_material

    def flaky(cfg, mesh, sample=0):
        if sample == 1:
            raise FloatingPointError("sample blew up")
        return real(cfg, mesh, sample)

    monkeypatch.setattr(E, "build_material", flaky)
    cfg = tiny("test-b-desk", samples=2)
    cfg.basis.L = [2]
    res = E.evaluate(cfg)
    assert res.failures == [{"sample": 1, "error": "FloatingPointError: sample blew up"}]
    assert len(res.mean_rows) == 2


def test_cli_run_and_verify(tmp_path, capsys):
    cfg = tiny()
    C.dump(cfg, tmp_path / "c.yaml")
    assert main(["run", "--config", str(tmp_path / "c.yaml"), "--out", str(tmp_path / "o"), "--seed", "3"]) == 0
    assert (tmp_path / "o" / "errors.csv").exists()
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["config"]["seed"] == 3
    assert main(["basis-report", "--config", str(tmp_path / "c.yaml"), "--out", str(tmp_path / "b"),
                 "--patch", "0", "--count", "2"]) == 0
    assert len(list((tmp_path / "b" / "eigenfunctions").glob("*.vtk"))) == 2
    assert main(["run", "--preset", "periodic", "--config", str(tmp_path / "c.yaml")]) == 2
    assert main(["show-config", "--preset", "test-a"]) == 0
    assert "gamma1: 0.75" in capsys.readouterr().out
