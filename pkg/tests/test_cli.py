import json
import os

import numpy as np
import pytest

from sgkink import cli
from sgkink import dynamics as dyn


def small_tree(**over):
    tree = {
        "grid": {"n_points": 1024, "half_length": "20pi"},
        "time": {"dt": 0.01, "t_final": 20, "snapshot_times": [1, 2, 5, 10, 20]},
        "initial_data": {"family": "odd_gaussian", "epsilon": 0.01, "sigma": 2.0},
        "diagnostics": {"every": 0.5},
        "checks": {"fit_window": [5, 20], "cauchy_times": [1, 2, 5, 10, 20],
                   "reconstruction_time": 20},
    }
    for key, value in over.items():
        section, _, name = key.partition("__")
        tree[section][name] = value
    return tree


def write_config(path, tree):
    path.write_text(json.dumps(tree))
    return str(path)


# ------------------------------------------------------------ verify

def test_verify_default_passes(capsys, tmp_path):
    code = cli.main(["verify", "--out", str(tmp_path / "v")])
    out = json.loads(capsys.readouterr().out)
    assert code == cli.EXIT_OK
    assert out == {"passed": True, "failures": []}
    saved = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert saved["passed"] and len(saved["reports"]) > 30


def test_verify_absurd_tolerance_fails(capsys):
    code = cli.main(["verify", "--tol-scale", "1e-21", "--only", "fourier,nonresonance"])
    out = json.loads(capsys.readouterr().out)
    assert code == cli.EXIT_FAIL
    res = cli.run_verify(["fourier", "nonresonance"], tol_scale=1e-21)
    assert len(out["failures"]) == len(res["reports"])


def test_verify_only_filters(capsys):
    code = cli.main(["verify", "--only", "nonresonance"])
    assert code == cli.EXIT_OK
    err = capsys.readouterr().err.strip().splitlines()
    assert err and all("nonresonance/" in line for line in err)


def test_verify_unknown_suite():
    assert cli.main(["verify", "--only", "bogus"]) == cli.EXIT_ERROR


def test_verify_composes():
    a = cli.run_verify(["nonresonance"])
    b = cli.run_verify(["normal_form"])
    both = cli.run_verify(["nonresonance", "normal_form"])
    assert both["passed"] == (a["passed"] and b["passed"])
    assert len(both["reports"]) == len(a["reports"]) + len(b["reports"])


# ------------------------------------------------------------ simulate

def test_simulate_zero_data(tmp_path):
    cfg = write_config(tmp_path / "c.json", small_tree(initial_data__epsilon=0.0))
    out = tmp_path / "run"
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == cli.EXIT_OK
    d = cli.read_diagnostics(str(out / cli.DIAGNOSTICS_FILE))
    for col in ("sup_u", "sup_v", "H2_v", "L2_xv", "H1Lv_proxy"):
        assert np.all(d[col] == 0.0), col


def test_simulate_deterministic(tmp_path):
    cfg = write_config(tmp_path / "c.json", small_tree())
    for name in ("a", "b"):
        assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / name)]) == 0
    for f in (cli.DIAGNOSTICS_FILE, cli.PROBES_FILE):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    snaps = sorted(os.listdir(tmp_path / "a" / cli.SNAPSHOT_DIR))
    for f in snaps:
        if f.endswith(".bin"):
            assert ((tmp_path / "a" / cli.SNAPSHOT_DIR / f).read_bytes()
                    == (tmp_path / "b" / cli.SNAPSHOT_DIR / f).read_bytes())


def test_simulate_creates_out_dir_and_manifest(tmp_path):
    cfg = write_config(tmp_path / "c.json", small_tree())
    out = tmp_path / "deep" / "nested" / "run"
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == cli.EXIT_OK
    manifest = json.loads((out / cli.MANIFEST_FILE).read_text())
    assert manifest["status"] == "ok"
    assert manifest["config_hash"] == dyn.config_hash(dyn.load_config(cfg))
    for f in manifest["files"]:
        assert (out / f).is_file(), f
    assert manifest["checks"]["energy_drift"]["passed"]
    assert manifest["checks"]["boundary_leak"]["passed"]


def test_csv_is_locale_independent(tmp_path):
    cfg = write_config(tmp_path / "c.json", small_tree())
    cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "r")])
    lines = (tmp_path / "r" / cli.DIAGNOSTICS_FILE).read_text().splitlines()
    assert lines[0].split(",") == list(dyn.DIAGNOSTIC_COLUMNS)
    assert all(len(line.split(",")) == len(dyn.DIAGNOSTIC_COLUMNS) for line in lines[1:])


def test_snapshot_round_trip(tmp_path):
    cfg = dyn.SimConfig.from_dict(small_tree())
    st = dyn.initial_state(cfg)
    cli.write_snapshot(st, str(tmp_path), "snap_0000")
    meta = json.loads((tmp_path / "snap_0000.json").read_text())
    assert meta["endianness"] == "little" and meta["dtype"] == "float64"
    back = cli.read_snapshot(str(tmp_path / "snap_0000.json"), cfg.grid)
    assert np.array_equal(back.u.values, st.u.values)
    assert np.array_equal(back.ut.values, st.ut.values)
    assert np.array_equal(back.w, st.w)
    assert back.t == st.t


def test_simulate_config_errors(tmp_path, capsys):
    bad = write_config(tmp_path / "bad.json", small_tree(grid__n_pionts=10))
    assert cli.main(["simulate", "--config", bad, "--out", str(tmp_path / "r")]) == cli.EXIT_ERROR
    assert "grid.n_pionts" in capsys.readouterr().err
    broken = tmp_path / "broken.json"
    broken.write_text('{\n "grid": {\n  "n_points": 1024,,\n }\n}')
    assert cli.main(["simulate", "--config", str(broken)]) == cli.EXIT_ERROR
    assert "broken.json:3:" in capsys.readouterr().err
    assert cli.main(["simulate"]) == cli.EXIT_ERROR


def test_simulate_abort_dumps_last_good(tmp_path, monkeypatch):
    cfg = dyn.SimConfig.from_dict(small_tree())
    good = dyn.initial_state(cfg)

    def boom(config, sink=None, initial=None):
        raise dyn.SimulationError("non-finite values at t = 1", good)

    monkeypatch.setattr(dyn, "simulate", boom)
    code, manifest = cli.run_simulation(cfg, str(tmp_path / "r"))
    assert code == cli.EXIT_ABORT
    assert manifest["status"] == "aborted"
    assert (tmp_path / "r" / cli.SNAPSHOT_DIR / "last_good.json").is_file()


# ------------------------------------------------------------ report

def test_report_empty_dir(tmp_path):
    (tmp_path / "empty").mkdir()
    assert cli.main(["report", str(tmp_path / "empty")]) == cli.EXIT_ERROR
    assert cli.main(["report"]) == cli.EXIT_ERROR


def test_report_linear_run(tmp_path):
    tree = small_tree(time__formulation="w", time__nonlinearity="off")
    cfg = write_config(tmp_path / "c.json", tree)
    run = tmp_path / "run"
    assert cli.main(["simulate", "--config", cfg, "--out", str(run)]) == cli.EXIT_OK
    cli.main(["report", str(run), "--out", str(tmp_path / "rep")])
    ms = json.loads((tmp_path / "rep" / "modified_scattering.json").read_text())
    assert ms["max_cauchy_difference"] < 1e-12
    assert max(abs(p) for p in ms["psi_measured"]) < 1e-12
    for f in ("decay_fit.json", "ode_residual.csv", "report.json", "decay.svg",
              "profile_modulus.svg", "phase_logt.svg"):
        assert (tmp_path / "rep" / f).is_file(), f


def test_report_smoke_run(tmp_path):
    cfg = dyn.load_config(os.path.join(os.path.dirname(__file__), "..", "configs", "smoke.json"))
    run = tmp_path / "run"
    code, _ = cli.run_simulation(cfg, str(run))
    assert code == cli.EXIT_OK
    summary = cli.build_report(str(run))
    assert set(summary["checks"]) >= {"decay", "stabilization", "phase_law", "reconstruction"}
    svg = (run / "reconstruction.svg").read_text()
    assert svg.startswith("<?xml") and "<!--" in svg
    # report output is deterministic
    first = (run / "decay_fit.json").read_bytes()
    cli.build_report(str(run))
    assert (run / "decay_fit.json").read_bytes() == first
    assert (run / "reconstruction.svg").read_text() == svg


# ------------------------------------------------------------ sweep

def test_sweep(tmp_path, capsys):
    tree = {"base": small_tree(time__t_final=5, time__snapshot_times=[1, 5]),
            "vary": {"initial_data.epsilon": [0.0, 0.01]}}
    cfg = write_config(tmp_path / "sweep.json", tree)
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out), "--jobs", "2"]) == cli.EXIT_OK
    res = json.loads((out / "sweep.json").read_text())
    assert [r["parameters"]["initial_data.epsilon"] for r in res["runs"]] == [0.0, 0.01]
    assert all((out / f"run_{i:03d}" / cli.MANIFEST_FILE).is_file() for i in range(2))


@pytest.mark.parametrize("tree", [
    {"base": {}, "vary": {"epsilon": [0.1]}},
    {"base": {}, "vary": {"initial_data.eps": [0.1]}},
    {"base": {}, "bogus": 1},
])
def test_sweep_config_errors(tmp_path, tree):
    cfg = write_config(tmp_path / "sweep.json", tree)
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "sw")]) == cli.EXIT_ERROR
