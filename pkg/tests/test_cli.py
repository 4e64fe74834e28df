import json
import subprocess
import sys

import numpy as np
import pytest

from tcfou import cli
from tcfou.io import config_hash, read_csv, read_manifest

CASES = {
    "simulate": ["simulate", "--seed", "7", "--paths", "300", "--t-grid", "0:1:0.25",
                 "--n-fine", "256"],
    "simulate-inverse": ["simulate", "--seed", "3", "--process", "inverse", "--paths", "5",
                         "--t-grid", "0:2:0.5", "--phi", '{"kind": "gamma", "params": {}}'],
    "density": ["density", "--t", "0.5,1", "--x-grid", "-1:1:0.5"],
    "moments": ["moments", "--n", "2,4", "--t-grid", "0:2:1"],
    "covariance": ["covariance", "--t-grid", "0:1:0.5"],
    "limit": ["limit", "--t", "5", "--x-grid", "0,1", "--paths", "500", "--seed", "1",
              "--n-fine", "256"],
    "converge": ["converge", "--metric", "vprime-envelope"],
    "fpe-check": ["fpe-check", "--lambda-grid", "1", "--x-grid", "1", "--track", "0.6,0.55"],
}


def run(argv, out):
    return cli.main([*argv, "--out", str(out)])


def contents(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.mark.parametrize("name", sorted(CASES))
def test_jobs_and_rerun_are_byte_identical(name, tmp_path):
    argv = CASES[name]
    assert run(argv, tmp_path / "a") == 0
    assert run([*argv, "--jobs", "3"], tmp_path / "b") == 0
    assert cli.main(["rerun", "--manifest", str(tmp_path / "a" / "manifest.json"),
                     "--out", str(tmp_path / "c"), "--jobs", "2"]) == 0
    ref = contents(tmp_path / "a")
    assert contents(tmp_path / "b") == ref
    assert contents(tmp_path / "c") == ref


def test_j1_rerun(tmp_path):
    for name, seed in (("a", "1"), ("b", "2")):
        assert run(["simulate", "--seed", seed, "--t-grid", "0:1:0.05", "--n-fine", "256"],
                   tmp_path / name) == 0
    argv = ["j1", "--a", str(tmp_path / "a" / "paths.csv"), "--b", str(tmp_path / "b" / "paths.csv")]
    assert run(argv, tmp_path / "j") == 0
    assert cli.main(["rerun", "--manifest", str(tmp_path / "j" / "manifest.json"),
                     "--out", str(tmp_path / "k")]) == 0
    assert contents(tmp_path / "j") == contents(tmp_path / "k")
    rep = json.loads((tmp_path / "j" / "j1.json").read_text())
    assert 0 <= rep["j1"] <= rep["identity_bound"]


def test_artifacts_embed_config_hash(tmp_path):
    run(CASES["moments"], tmp_path)
    man = read_manifest(tmp_path / "manifest.json")
    assert man["schema_version"] == 1 and man["artifacts"] == ["moments.csv"]
    first = (tmp_path / "moments.csv").read_text().splitlines()[0]
    assert first == f"# config_hash={man['config_hash']}"
    assert config_hash(man["config"]) == man["config_hash"]
    header, rows = read_csv(tmp_path / "moments.csv")
    assert header == ["t", "n", "V"] and rows.shape == (6, 3)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"hurst": 0.6, "t_grid": "0:1:1"}))
    run(["covariance", "--config", str(cfg), "--hurst", "0.8"], tmp_path / "o")
    man = read_manifest(tmp_path / "o" / "manifest.json")
    assert man["config"]["hurst"] == 0.8 and man["config"]["t_grid"] == "0:1:1"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(["covariance", "--config", str(cfg)], tmp_path / "p") == 1


def test_json_format(tmp_path):
    run([*CASES["covariance"], "--format", "json"], tmp_path)
    data = json.loads((tmp_path / "covariance.json").read_text())
    assert set(data["columns"]) == {"t", "s", "C"} and "config_hash" in data


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(CASES["covariance"]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()


@pytest.mark.parametrize("argv", [
    ["simulate", "--t-grid", "0:1:0.5"],                 # seed missing
    ["density", "--hurst", "0.3"],                        # H outside [1/2, 1)
    ["density", "--phi", '{"kind": "custom", "params": {"killing": 0.1, '
                         '"levy_tail": "t**-0.5"}}'],     # killing rate
    ["density", "--phi", "{not json"],
    ["moments", "--jobs", "0"],
    ["covariance", "--unknown-flag"],
    ["fpe-check", "--x-grid", "0,1"],
])
def test_invalid_configuration_exit_1(argv, tmp_path):
    assert run(argv, tmp_path) == 1


def test_numeric_failure_exit_2(tmp_path):
    # the exact backend refuses grids above 2000 points
    argv = ["simulate", "--seed", "1", "--backend", "exact", "--t-grid", "0:1:0.0001"]
    assert run(argv, tmp_path) == 2


def test_assert_exit_codes(tmp_path):
    argv = ["converge", "--track", "0.6,0.55,0.52", "--metric", "v2-supnorm", "--assert"]
    assert run(argv, tmp_path / "ok") == 0
    rep = json.loads((tmp_path / "ok" / "converge_report.json").read_text())
    assert rep["verdicts"]["monotone_decreasing"]
    assert run([*argv, "--threshold", "1e-9"], tmp_path / "bad") == 3
    assert run([*argv[:-1], "--threshold", "1e-9"], tmp_path / "quiet") == 0


def test_custom_phi_expression(tmp_path):
    argv = ["simulate", "--seed", "1", "--t-grid", "0:1:0.25", "--backend", "exact",
            "--phi", '{"kind": "custom", "params": {"levy_tail": "t**-0.5/gamma(0.5)"}}']
    assert run(argv, tmp_path) == 0


def test_negative_grid_values(tmp_path):
    assert run(["density", "--x-grid", "-1:1:1", "--t", "1"], tmp_path) == 0
    _, rows = read_csv(tmp_path / "density.csv")
    assert np.allclose(rows[:, 0], [-1, 0, 1])


@pytest.mark.xfail(strict=True, reason="trapezoid rule at step 0.05 misses the |x|^(1/H-1) "
                   "cusp at the origin; mass is 1.00495")
def test_density_example_mass(tmp_path):
    run(["density", "--hurst", "0.7", "--alpha", "0.5", "--theta", "1", "--t", "1",
         "--x-grid", "-3:3:0.05"], tmp_path)
    _, rows = read_csv(tmp_path / "density.csv")
    mass = np.trapezoid(rows[:, 1], rows[:, 0])
    assert 0.999 <= mass <= 1.001


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "tcfou.cli", "--help"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and "fpe-check" in out.stdout
