import json
import os
import subprocess
import sys

import numpy as np
import pytest

from dataenrich import FitConfig, fit, load_dataset, load_params
from dataenrich.cli import main
from dataenrich.io import read_trace_csv

from oracles import chi_mean


SMALL_SYNTH = {"p": 5, "G": 2, "n_per_group": 20, "sparsity": 2,
               "noise_sigma": 0.3, "seed": 7}


@pytest.fixture(scope="module")
def small_cfg(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "small.json"
    path.write_text(json.dumps({"synthesis": SMALL_SYNTH}))
    return str(path)


@pytest.fixture(scope="module")
def small_data(tmp_path_factory, small_cfg):
    out = str(tmp_path_factory.mktemp("data") / "ds")
    assert main(["generate", "--config", small_cfg, "--out", out]) == 0
    return out


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert main(["fit", "--help"]) == 0
    capsys.readouterr()


def test_generate_outputs(small_data):
    names = os.listdir(small_data)
    for expected in ("manifest.json", "X_1.csv", "X_2.csv", "y_1.csv",
                     "y_2.csv", "params.csv", "meta.json"):
        assert expected in names
    manifest = json.loads(open(os.path.join(small_data, "manifest.json")).read())
    assert manifest["G"] == 2 and manifest["p"] == 5
    assert manifest["n_g"] == [20, 20]
    meta = json.loads(open(os.path.join(small_data, "meta.json")).read())
    assert meta["command"] == "generate"
    assert meta["seed"] == 7
    assert "backend" in meta["versions"]


def test_generate_needs_spec(capsys):
    assert main(["generate"]) == 1
    assert "[dataenrich:config]" in capsys.readouterr().err


def test_generate_preset_conflicts_with_section(small_cfg, tmp_path, capsys):
    rc = main(["generate", "--preset", "fig_a", "--config", small_cfg,
               "--out", str(tmp_path / "x")])
    assert rc == 1
    assert "[dataenrich:config]" in capsys.readouterr().err


def test_unknown_config_keys_rejected(tmp_path, capsys):
    bad_top = tmp_path / "top.json"
    bad_top.write_text(json.dumps({"synthesis": SMALL_SYNTH, "bogus": 1}))
    assert main(["generate", "--config", str(bad_top),
                 "--out", str(tmp_path / "a")]) == 1
    assert "bogus" in capsys.readouterr().err

    bad_sec = tmp_path / "sec.json"
    bad_sec.write_text(json.dumps({"synthesis": dict(SMALL_SYNTH, typo=3)}))
    assert main(["generate", "--config", str(bad_sec),
                 "--out", str(tmp_path / "b")]) == 1
    assert "typo" in capsys.readouterr().err


def test_generate_preset_byte_identical(tmp_path, capsys):
    d1 = tmp_path / "one"
    d2 = tmp_path / "two"
    for d in (d1, d2):
        assert main(["generate", "--preset", "fig_a", "--seed", "1",
                     "--out", str(d)]) == 0
    capsys.readouterr()
    names = sorted(os.listdir(d1))
    assert names == sorted(os.listdir(d2))
    assert sum(n.startswith("X_") for n in names) == 10
    for name in names:
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name
    # each design block has one row per group member
    first = (d1 / "X_1.csv").read_text().strip().splitlines()
    assert len(first) == 60


def test_fit_flow(small_data, tmp_path, capsys):
    out = tmp_path / "fit"
    rc = main(["fit", "--data", small_data, "--iters", "80",
               "--out", str(out)])
    assert rc == 0
    assert "fit finished" in capsys.readouterr().out
    est = load_params(out / "params.csv", n_groups=2, dim=5)
    assert est.dim == 5
    cols = read_trace_csv(out / "trace.csv")
    assert len(cols["iter"]) <= 80
    assert "err_rel_0" in cols and "weighted_err" in cols
    meta = json.loads((out / "meta.json").read_text())
    assert meta["command"] == "fit"
    assert meta["max_violation"] <= 1e-12
    assert "wall_time_s" in meta


def test_fit_single_iteration_matches_library(small_data, tmp_path, capsys):
    out = tmp_path / "one"
    assert main(["fit", "--data", small_data, "--iters", "1",
                 "--out", str(out)]) == 0
    capsys.readouterr()
    cli_est = load_params(out / "params.csv")
    dataset, _, constraints, _ = load_dataset(small_data)
    direct = fit(dataset, constraints, FitConfig(max_iters=1))
    assert np.array_equal(cli_est.as_matrix(), direct.estimate.as_matrix())


def test_fit_rerun_identical(small_data, tmp_path, capsys):
    outs = [tmp_path / "r1", tmp_path / "r2"]
    for out in outs:
        assert main(["fit", "--data", small_data, "--iters", "60",
                     "--out", str(out)]) == 0
    capsys.readouterr()
    assert (outs[0] / "trace.csv").read_bytes() == (outs[1] / "trace.csv").read_bytes()
    assert (outs[0] / "params.csv").read_bytes() == (outs[1] / "params.csv").read_bytes()


def test_fit_order_flag_changes_result(small_data, tmp_path, capsys):
    a = tmp_path / "jac"
    b = tmp_path / "gs"
    assert main(["fit", "--data", small_data, "--iters", "10",
                 "--out", str(a)]) == 0
    assert main(["fit", "--data", small_data, "--iters", "10",
                 "--order", "gauss_seidel", "--out", str(b)]) == 0
    capsys.readouterr()
    ma = load_params(a / "params.csv").as_matrix()
    mb = load_params(b / "params.csv").as_matrix()
    assert not np.array_equal(ma, mb)


def test_fit_missing_data(capsys, tmp_path):
    assert main(["fit", "--out", str(tmp_path / "x")]) == 1
    assert "[dataenrich:config]" in capsys.readouterr().err


def test_out_root_env(monkeypatch, tmp_path, small_cfg, capsys):
    root = tmp_path / "custom_root"
    monkeypatch.setenv("DATAENRICH_OUT_ROOT", str(root))
    assert main(["generate", "--config", small_cfg]) == 0
    capsys.readouterr()
    assert (root / "generate" / "manifest.json").is_file()


def test_exit_codes_subprocess(small_data, tmp_path):
    env = dict(os.environ, DATAENRICH_OUT_ROOT=str(tmp_path / "runs"))

    usage = subprocess.run(["dataenrich", "generate"], env=env,
                           capture_output=True, text=True)
    assert usage.returncode == 1
    assert usage.stderr.startswith("[dataenrich:config]")

    blowup = tmp_path / "blowup.json"
    blowup.write_text(json.dumps(
        {"fit": {"step_mode": "manual", "mu0": 1e12, "mus": [1e12, 1e12]}}
    ))
    numeric = subprocess.run(
        ["dataenrich", "fit", "--data", small_data, "--config", str(blowup),
         "--out", str(tmp_path / "div")],
        env=env, capture_output=True, text=True)
    assert numeric.returncode == 2
    assert numeric.stderr.startswith("[dataenrich:numeric]")

    ok = subprocess.run(["dataenrich", "--help"], env=env,
                        capture_output=True, text=True)
    assert ok.returncode == 0


def test_experiment_command(tmp_path, capsys):
    out = tmp_path / "exp"
    rc = main(["experiment", "--name", "fig_a", "--reps", "2", "--iters", "30",
               "--seed", "3", "--threads", "2", "--out", str(out)])
    assert rc == 0
    assert "experiment fig_a" in capsys.readouterr().out
    avg = read_trace_csv(out / "trace_avg.csv")
    assert len(avg["iter"]) == 30
    for g in range(11):
        assert (out / f"trace_block_{g}.csv").is_file()
    doc = json.loads((out / "experiment.json").read_text())
    assert doc["name"] == "fig_a" and doc["repetitions"] == 2
    meta = json.loads((out / "meta.json").read_text())
    assert meta["final_weighted_error"] == pytest.approx(avg["weighted_err"][-1])


def test_diagnose_widths(tmp_path, capsys):
    out = tmp_path / "w"
    rc = main(["diagnose", "--widths", "--p", "1,16", "--trials", "400",
               "--seed", "5", "--out", str(out)])
    assert rc == 0
    capsys.readouterr()
    rows = open(out / "widths.csv").read().strip().splitlines()
    assert rows[0] == "p,width,std_error"
    assert len(rows) == 3
    for line, p in zip(rows[1:], (1, 16)):
        got = float(line.split(",")[1])
        assert abs(got - chi_mean(p)) < 0.2


def test_diagnose_probes(small_data, tmp_path, capsys):
    out = tmp_path / "probe"
    rc = main(["diagnose", "--data", small_data, "--trials", "200",
               "--seed", "9", "--out", str(out)])
    assert rc == 0
    assert "report written" in capsys.readouterr().out
    report = json.loads((out / "report.json").read_text())
    for key in ("width_0", "re_kappa_sq", "deic_rho_fraction",
                "contraction_derived_rho", "gamma"):
        assert key in report
    assert report["gamma"] == pytest.approx(2.0)
    assert report["re_kappa_sq"] >= 0.0
    assert report["trials"] == 200 and report["seed"] == 9


def test_cv_command(small_data, tmp_path, capsys):
    cfg = tmp_path / "cv.json"
    cfg.write_text(json.dumps({"cv": {
        "k": 3, "scale0_grid": [1.0], "scale_ind_grid": [0.5, 1.0],
        "max_iters": 120,
    }}))
    out = tmp_path / "cv"
    rc = main(["cv", "--data", small_data, "--config", str(cfg),
               "--seed", "4", "--out", str(out)])
    assert rc == 0
    assert "cv best point" in capsys.readouterr().out
    rows = open(out / "cv_table.csv").read().strip().splitlines()
    assert rows[0].startswith("scale0,scale_ind")
    assert len(rows) == 3
    assert sum(line.endswith(",1") for line in rows[1:]) == 1
    meta = json.loads((out / "meta.json").read_text())
    assert meta["k"] == 3
    assert (out / "params.csv").is_file()
