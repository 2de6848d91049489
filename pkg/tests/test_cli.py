import subprocess
import sys

import pytest

from lrpg.cli import main

CONFIG = """env = pendulum
algorithm = lrpg rvfb
bins = 5 4
rank = 2
episodes = 8
horizon = 25
hidden = 8
alpha_mu = 1e-4
alpha_omega = 1e-5
seeds = 0 1 2
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "small.conf"
    path.write_text(CONFIG)
    return path


def test_run_is_byte_identical(tmp_path, config):
    assert main(["run", "--config", str(config), "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert main(["run", "--config", str(config), "--out", str(tmp_path / "b"), "--quiet"]) == 0
    for name in ("summary.csv", "lrpg/curve.csv", "rvfb/curve.csv", "config.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_jobs_and_seeds_flag(tmp_path, config):
    assert main(["run", "--config", str(config), "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert main(["run", "--config", str(config), "--out", str(tmp_path / "b"), "--quiet",
                 "--jobs", "2"]) == 0
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()
    assert main(["run", "--config", str(config), "--out", str(tmp_path / "c"), "--quiet",
                 "--seeds", "2"]) == 0
    rows = (tmp_path / "c" / "summary.csv").read_text().splitlines()
    assert rows[1].endswith(",2,0")
    assert sorted(p.name for p in (tmp_path / "c" / "lrpg").glob("seed_*.csv")) == \
        ["seed_0.csv", "seed_1.csv"]


def test_run_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.conf"
    bad.write_text("env = pendulum\nrank = 0\n")
    assert main(["run", "--config", str(bad), "--quiet"]) == 1
    assert "rank" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.conf")]) == 1


def test_run_all_seeds_failing_exits_2(tmp_path):
    path = tmp_path / "diverge.conf"
    path.write_text(CONFIG.replace("alpha_mu = 1e-4", "alpha_mu = 1e300"))
    with pytest.warns(RuntimeWarning):
        code = main(["run", "--config", str(path), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 2
    assert (tmp_path / "o" / "summary.csv").exists()


def test_eval_checkpoint(tmp_path, config, capsys):
    assert main(["run", "--config", str(config), "--out", str(tmp_path / "o"), "--quiet"]) == 0
    ckpt = tmp_path / "o" / "lrpg" / "checkpoints" / "seed_0_mu.ckpt"
    assert main(["eval", "--checkpoint", str(ckpt), "--env", "pendulum", "--episodes", "3",
                 "--config", str(config)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 4 and out[-1].startswith("mean return")
    # the default pendulum grid is 20x20, which does not match this 5x4 checkpoint
    assert main(["eval", "--checkpoint", str(ckpt), "--env", "pendulum"]) == 1
    assert main(["eval", "--checkpoint", str(tmp_path / "nope.ckpt"), "--env", "pendulum"]) == 1


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--instances", "10"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.endswith("PASS") for line in lines)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lrpg.cli", "gradcheck", "--instances", "4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "lrpg.cli", "run"], capture_output=True, text=True)
    assert proc.returncode == 1  # usage errors count as configuration errors
