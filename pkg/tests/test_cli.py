import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pwgf.cli import build_parser, main
from pwgf.experiments import load_run, make_config
from pwgf.reconstruct import GridFunction
from pwgf.reference import ConfigurationError

FAST = ["--set", "K=3", "--set", "N=200", "--set", "H=4", "--set", "n_cg=20"]


def only_run(root):
    dirs = [p for p in Path(root).glob("*/*") if p.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


def test_subcommands_and_flags():
    ap = build_parser()
    for cmd in ("run-pwgf", "run-h1", "warmstart", "ablation", "reconstruct"):
        assert cmd in ap._subparsers._group_actions[0].choices
    args = ap.parse_args(["run-pwgf", "--experiment", "gpe2d", "--seed", "3", "--threads", "2",
                          "--deterministic", "--out", "x", "--config", "c.ini"])
    assert (args.experiment, args.seed, args.threads, args.deterministic) == ("gpe2d", 3, 2, True)


def test_run_pwgf_writes_artifacts(tmp_path, capsys):
    assert main(["run-pwgf", "--seed", "0", "--out", str(tmp_path)] + FAST) == 0
    d = only_run(tmp_path)
    names = {p.name for p in d.iterdir()}
    assert {"steps.csv", "summary.json", "u.f64", "u.json", "u.csv", "errors.csv"} <= names
    s = json.loads((d / "summary.json").read_text())
    assert s["seed"] == 0 and s["config"]["K"] == 3 and s["experiment"]["pwgf"]["N"] == 200
    assert len(s["best_theta"]) == 4 + 4 + 16 + 4 + 4 + 1
    out = json.loads(capsys.readouterr().out)
    assert out["best_E"] == s["best_E"]


def test_rerun_from_summary_is_byte_identical(tmp_path):
    main(["run-pwgf", "--out", str(tmp_path / "a")] + FAST)
    first = only_run(tmp_path / "a")
    cfg, _ = load_run(first)
    from pwgf.experiments import run_pwgf
    second = tmp_path / "b"
    second.mkdir()
    run_pwgf(cfg, second)
    for name in ("steps.csv", "errors.csv", "u.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    assert (first / "u.f64").read_bytes() == (second / "u.f64").read_bytes()


def test_invalid_particle_count_names_the_rule(tmp_path, capsys):
    assert main(["run-pwgf", "--out", str(tmp_path), "--set", "N=3001"]) == 2
    assert "divisible by 2**d=2" in capsys.readouterr().err


def test_config_file_and_overrides(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[pwgf]\nexperiment = gpe2d\nK = 7\nalpha = 0.01\n"
                   "[fd]\nfd_n = 64\ntau = 0.5\n")
    cfg = make_config(path=ini, overrides={"N": "400"})
    assert cfg.id == "gpe2d" and cfg.pwgf.K == 7 and cfg.pwgf.alpha == 0.01
    assert cfg.pwgf.N == 400 and cfg.fd_n == 64 and cfg.tau == 0.5
    assert cfg.pwgf.n_cg == 200          # untouched Table-1 value
    with pytest.raises(ConfigurationError, match="unknown setting"):
        make_config(overrides={"bogus": "1"})
    with pytest.raises(ConfigurationError, match="integer"):
        make_config(overrides={"K": "many"})
    bad = tmp_path / "bad.ini"
    bad.write_text("[solver]\nx = 1\n")
    with pytest.raises(ConfigurationError, match="section"):
        make_config(path=bad)


def test_h1_warmstart_and_reconstruct(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[pwgf]\nexperiment = gpe2d\nK = 2\nN = 200\nH = 4\nn_cg = 10\n"
                   "[fd]\nfd_n = 30\nrecon_n = 20\nh1_tol = 1e-10\n")
    out = tmp_path / "runs"
    assert main(["warmstart", "--config", str(ini), "--out", str(out)]) == 0
    d = only_run(out)
    rows = (d / "warmstart.csv").read_text().splitlines()
    assert rows[0] == "init,E0,abs_E1_minus_Eref,steps_to_tol"
    assert [r.split(",")[0] for r in rows[1:]] == ["constant", "random", "warm"]
    assert main(["run-h1", "--config", str(ini), "--out", str(out / "h"),
                 "--init", "warm", "--grid", str(d / "u")]) == 0
    assert main(["reconstruct", "--run", str(d), "--n", "11"]) == 0
    g = GridFunction.load(d / "u_11")
    assert g.values.shape == (11, 11) and g.norm() == pytest.approx(1.0, abs=1e-12)
    capsys.readouterr()
    assert main(["warmstart", "--config", str(ini), "--out", str(out),
                 "--grid", str(tmp_path / "missing")]) == 2
    assert "not found" in capsys.readouterr().err
    assert main(["run-h1", "--config", str(ini), "--out", str(out), "--init", "warm"]) == 2


def test_ablation_sweep(tmp_path):
    assert main(["ablation", "--axis", "N_ODE", "--values", "5", "10", "--out", str(tmp_path)]
                + FAST) == 0
    lines = (only_run(tmp_path) / "ablation_N_ODE.csv").read_text().splitlines()
    assert lines[0] == "axis,value,seed,best_err,final_err,best_E" and len(lines) == 3


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "pwgf", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "run-pwgf" in r.stdout
