"""Tests for command line interface."""

import json
import os
import subprocess
import sys

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def _main(*args, env=None):
    environ = {k: v for k, v in os.environ.items() if not k.startswith("CEDSCHRO_")}
    environ.update(env or {})
    return subprocess.run(
        [sys.executable, "main.py", *args],
        capture_output=True,
        text=True,
        cwd=REPO_ROOT,
        env=environ,
    )


def test_help_option():
    """Test --help displays usage information."""
    result = _main("--help")
    assert result.returncode == 0
    assert "Whole-line Schrodinger solver" in result.stdout
    for command in ("run", "sweep", "converge", "presets"):
        assert command in result.stdout
    assert "Examples:" in result.stdout


def test_version_option():
    """Test --version displays version."""
    result = _main("--version")
    assert result.returncode == 0
    assert "ced-schrodinger" in result.stdout
    assert "0.1.0" in result.stdout


def test_presets_command():
    """Test that presets lists every bundled experiment."""
    result = _main("presets")
    assert result.returncode == 0
    assert "linear-ced" in result.stdout
    assert "soliton-tbc" in result.stdout
    assert "perturbed-peregrine" in result.stdout


def test_run_small_config(small_ced_file, tmp_path):
    """Test a small run end to end."""
    result = _main("run", str(small_ced_file), "--output-dir", str(tmp_path))
    assert result.returncode == 0, result.stderr
    assert ": ok" in result.stdout
    name = small_ced_file.stem
    assert (tmp_path / f"{name}.csv").exists()
    assert (tmp_path / f"{name}_field.csv").exists()
    summary = json.loads((tmp_path / f"{name}.json").read_text())
    assert summary["status"] == "ok"


def test_run_preset_with_overrides(tmp_path):
    """Test --set on a bundled preset."""
    result = _main(
        "run", "linear-ced",
        "--set", "domain.orders=16,80,24",
        "--set", "time.final=0.01",
        "--set", "time.steps=10",
        "--set", "output.name=smoke",
        "--output-dir", str(tmp_path),
    )
    assert result.returncode == 0, result.stderr
    summary = json.loads((tmp_path / "smoke.json").read_text())
    assert summary["steps"] == 10
    assert summary["decomposition"]["orders"] == [16, 80, 24]


def test_environment_override(small_ced_file, tmp_path):
    """Test that CEDSCHRO_* variables reach the run."""
    result = _main(
        "run", str(small_ced_file), "--output-dir", str(tmp_path),
        env={"CEDSCHRO_TIME__STEPS": "10"},
    )
    assert result.returncode == 0, result.stderr
    summary = json.loads((tmp_path / f"{small_ced_file.stem}.json").read_text())
    assert summary["steps"] == 10
    assert summary["environment"] == {"time.steps": "10"}


def test_bad_config_exits_2(bad_pml_file):
    """Test that a config error exits with code 2."""
    result = _main("run", str(bad_pml_file))
    assert result.returncode == 2
    assert "sigma0" in result.stderr


def test_unknown_preset_exits_2():
    """Test that an unknown preset exits with code 2 and lists presets."""
    result = _main("run", "no-such-preset")
    assert result.returncode == 2
    assert "linear-ced" in result.stderr


def test_bad_override_exits_2(small_ced_file):
    """Test that a malformed --set exits with code 2."""
    result = _main("run", str(small_ced_file), "--set", "time.steps")
    assert result.returncode == 2


def test_numerical_failure_exits_3(small_ced_file, tmp_path):
    """Test that a non-converging step exits with code 3 and keeps partial output."""
    result = _main(
        "run", str(small_ced_file),
        "--set", "problem.id=soliton",
        "--set", "problem.soliton_c=2",
        "--set", "time.fp_max_iters=1",
        "--output-dir", str(tmp_path),
    )
    assert result.returncode == 3
    assert "FAILED" in result.stderr
    summary = json.loads((tmp_path / f"{small_ced_file.stem}.json").read_text())
    assert summary["status"] == "failed"


def test_sweep_command(small_pml_file, tmp_path):
    """Test a two-value sigma0 sweep."""
    result = _main("sweep", str(small_pml_file), "--values", "40", "50", "--output-dir", str(tmp_path))
    assert result.returncode == 0, result.stderr
    assert "best:" in result.stdout
    assert (tmp_path / f"{small_pml_file.stem}_sweep.json").exists()


def test_sweep_bad_value_exits_2(small_pml_file, tmp_path):
    """Test that a non-numeric sigma0 value exits with code 2."""
    result = _main("sweep", str(small_pml_file), "--values", "40", "fifty", "--output-dir", str(tmp_path))
    assert result.returncode == 2
    assert "pml.sigma0" in result.stderr
    assert "Traceback" not in result.stderr


def test_converge_command(small_ced_file, tmp_path):
    """Test a two-point convergence study."""
    result = _main(
        "converge", str(small_ced_file), "--resolutions", "10", "20", "--output-dir", str(tmp_path)
    )
    assert result.returncode == 0, result.stderr
    assert "order:" in result.stdout
    assert (tmp_path / f"{small_ced_file.stem}_convergence.csv").exists()


def test_missing_command():
    """Test that a command is required."""
    result = _main()
    assert result.returncode != 0
    assert "usage" in result.stderr.lower()


def test_invalid_option():
    """Test invalid option shows error."""
    result = _main("--invalid-option")
    assert result.returncode != 0
    assert "error" in result.stderr.lower()
