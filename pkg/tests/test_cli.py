import pandas as pd
import pytest
import yaml

from cli.args import COMMANDS, build_parser
from cli.main import EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK, main
from config.paths import (
    ABLATION_NAME, ALPHA_TRACE_NAME, CHECKPOINT_NAME, COMPARISON_NAME, CONTINUAL_NAME, DATASET_NAME,
    EVAL_REPORT_NAME, PLOTS_DIR_NAME, RESOLVED_CONFIG_NAME, TRAINING_TRACE_NAME, VALIDATION_NAME, VERDICT_NAME,
)

TINY = {
    "manifest": {"num_tasks": 2, "trajectories_per_tier": 1, "episode_length": 12, "horizon": 4},
    "trainer": {
        "total_steps": 4, "batch_size": 4, "horizon": 4, "hidden": 8,
        "warmup_steps": 1, "decay_steps": 4, "log_every": 0,
    },
    "eval": {"episodes": 1, "euler_steps": 2},
    "ablation": {"lambda_grid": [5.0e-4], "m_grid": [1, 2], "m_reference": 4, "shots_grid": [1]},
    "continual": {"group_a": [0], "group_b": [1]},
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return str(path)


@pytest.fixture
def generated(tmp_path, tiny_config):
    out = tmp_path / "data"
    assert main(["gen-data", "--config", tiny_config, "--out", str(out), "--quiet"]) == EXIT_OK
    return out / DATASET_NAME


def test_parser_knows_every_command():
    parser = build_parser()
    for command in COMMANDS:
        extra = {"eval": ["--checkpoint", "x"], "plot": ["--run-dir", "x"]}.get(command, [])
        assert parser.parse_args([command, *extra]).command == command
    with pytest.raises(SystemExit):
        parser.parse_args(["train", "--mode", "ppo"])


def test_gen_data_writes_dataset_and_config(generated):
    assert generated.exists()
    resolved = yaml.safe_load((generated.parent / RESOLVED_CONFIG_NAME).read_text())
    assert resolved["manifest"]["num_tasks"] == 2


def test_train_eval_plot(tmp_path, tiny_config, generated):
    run = tmp_path / "run"
    code = main(["train", "--config", tiny_config, "--dataset", str(generated), "--out", str(run),
                 "--mode", "arfm", "--seed", "5", "--quiet"])
    assert code == EXIT_OK
    for name in (CHECKPOINT_NAME, TRAINING_TRACE_NAME, ALPHA_TRACE_NAME, RESOLVED_CONFIG_NAME):
        assert (run / name).exists()
    assert yaml.safe_load((run / RESOLVED_CONFIG_NAME).read_text())["trainer"]["seed"] == 5

    eval_dir = run / "eval"
    code = main(["eval", "--config", tiny_config, "--checkpoint", str(run / CHECKPOINT_NAME),
                 "--out", str(eval_dir), "--quiet"])
    assert code == EXIT_OK
    report = pd.read_csv(eval_dir / EVAL_REPORT_NAME)
    assert len(report) == 2
    assert report["success_rate"].between(0.0, 1.0).all()

    assert main(["plot", "--run-dir", str(run), "--quiet"]) == EXIT_OK
    assert (run / PLOTS_DIR_NAME / "training_curves.png").exists()
    assert (run / PLOTS_DIR_NAME / "alpha_trace.png").exists()


def test_train_without_dataset_is_an_error(tmp_path, tiny_config, capsys):
    code = main(["train", "--config", tiny_config, "--dataset", str(tmp_path / "none.jsonl"),
                 "--out", str(tmp_path / "run"), "--quiet"])
    assert code == EXIT_ERROR
    assert "[ERROR] ConfigurationError" in capsys.readouterr().out


def test_eval_with_missing_checkpoint(tmp_path, tiny_config):
    code = main(["eval", "--config", tiny_config, "--checkpoint", str(tmp_path / "none.joblib"),
                 "--out", str(tmp_path / "eval"), "--quiet"])
    assert code == EXIT_ERROR


def test_plot_needs_a_run_directory(tmp_path):
    assert main(["plot", "--run-dir", str(tmp_path / "missing")]) == EXIT_ERROR


def test_validate_exit_codes(tmp_path, tiny_config):
    out = tmp_path / "validate"
    code = main(["validate", "--config", tiny_config, "--out", str(out), "--quiet",
                 "--checks", "nbt_examples", "finite_difference"])
    assert code == EXIT_OK
    results = pd.read_csv(out / VALIDATION_NAME)
    assert results["name"].tolist() == ["nbt_examples", "finite_difference"]
    assert results["passed"].all()

    strict = tmp_path / "strict.yaml"
    strict.write_text(yaml.safe_dump({"validate": {"tolerance_override": {"finite_difference": 0.0}}}))
    code = main(["validate", "--config", str(strict), "--out", str(tmp_path / "strict"), "--quiet",
                 "--checks", "finite_difference"])
    assert code == EXIT_CHECK_FAILED

    assert main(["validate", "--out", str(out), "--checks", "bogus", "--quiet"]) == EXIT_ERROR


def test_unknown_config_section(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"optimizer": {}}))
    assert main(["gen-data", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_ERROR


@pytest.mark.slow
def test_ablate_and_continual(tmp_path, tiny_config, generated):
    out = tmp_path / "ablate"
    assert main(["ablate", "--config", tiny_config, "--dataset", str(generated), "--out", str(out), "--quiet"]) == EXIT_OK
    frame = pd.read_csv(out / ABLATION_NAME)
    assert frame["grid"].tolist() == ["lambda", "M", "M", "shots"]
    assert frame.loc[frame["grid"] == "M", "alpha_deviation"].notna().all()

    out = tmp_path / "continual"
    assert main(["continual", "--config", tiny_config, "--dataset", str(generated), "--out", str(out),
                 "--quiet"]) == EXIT_OK
    continual = pd.read_csv(out / CONTINUAL_NAME)
    assert continual["phase"].tolist() == ["phase_1", "phase_2"]
    assert (continual["nbt"] >= 0).all()


@pytest.mark.slow
def test_compare_with_alpha_pinned_at_zero(tmp_path):
    # alpha in [0, 0] makes ARFM train exactly like vanilla FM, so every seed ties and passes
    pinned = tmp_path / "pinned.yaml"
    pinned.write_text(yaml.safe_dump({**TINY, "alpha": {"alpha_min": 0.0, "alpha_max": 0.0}}))
    out = tmp_path / "compare"
    code = main(["compare", "--config", str(pinned), "--out", str(out), "--seeds", "0", "1", "--quiet"])
    assert code == EXIT_OK

    runs = pd.read_csv(out / COMPARISON_NAME)
    assert len(runs) == 2 * 4
    assert set(runs["mode"]) == {"arfm", "vanilla_fm", "fixed_alpha", "rwr"}
    verdict = pd.read_csv(out / VERDICT_NAME)
    assert verdict["seed"].tolist() == [0, 1]
    assert verdict["passed"].all()
    assert (verdict["arfm_goal_distance"] == verdict["vanilla_goal_distance"]).all()
    assert yaml.safe_load((out / RESOLVED_CONFIG_NAME).read_text())["compare"]["seeds"] == [0, 1]

    assert main(["plot", "--run-dir", str(out), "--quiet"]) == EXIT_OK
    assert (out / PLOTS_DIR_NAME / "comparison.png").exists()
