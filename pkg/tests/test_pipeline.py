import subprocess

import pytest

from config.paths import OUTPUT_ROOT_ENV
from scripts import run_full_pipeline


@pytest.fixture
def recorded(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    calls = []

    def fake_run(cmd, cwd=None, env=None, check=False):
        calls.append(cmd)
        return subprocess.CompletedProcess(cmd, 0)

    monkeypatch.setattr(run_full_pipeline.subprocess, "run", fake_run)
    return calls


def test_pipeline_step_order(recorded):
    run_full_pipeline.main(["--seed", "3"])
    commands = [cmd[3] for cmd in recorded]
    assert commands[0] == "gen-data"
    assert commands[-3:] == ["validate", "compare", "plot"]
    assert commands.count("train") == 2
    assert commands.count("eval") == 2
    assert commands.count("plot") == 5
    assert all(cmd[1:3] == ["-m", "cli.main"] for cmd in recorded)
    assert all(cmd[-2:] == ["--seed", "3"] for cmd in recorded)


def test_each_mode_trains_on_the_generated_dataset(recorded, tmp_path):
    run_full_pipeline.main([])
    trains = [cmd for cmd in recorded if cmd[3] == "train"]
    modes = [cmd[cmd.index("--mode") + 1] for cmd in trains]
    assert modes == ["arfm", "vanilla_fm"]
    for cmd in trains:
        assert cmd[cmd.index("--dataset") + 1].startswith(str(tmp_path.resolve() / "pipeline"))


def test_failing_step_aborts(monkeypatch):
    def failing_run(cmd, cwd=None, env=None, check=False):
        raise subprocess.CalledProcessError(2, cmd)

    monkeypatch.setattr(run_full_pipeline.subprocess, "run", failing_run)
    with pytest.raises(SystemExit) as info:
        run_full_pipeline.run_step("train", ["--quiet"])
    assert info.value.code == 1


def test_comparison_gets_its_own_run_directory(recorded, tmp_path):
    run_full_pipeline.main([])
    compare = next(cmd for cmd in recorded if cmd[3] == "compare")
    out = compare[compare.index("--out") + 1]
    assert out == str(tmp_path.resolve() / "pipeline" / "compare")
    assert recorded[-1][recorded[-1].index("--run-dir") + 1] == out
