import joblib
import numpy as np
import pandas as pd
import pytest

from config.paths import ALPHA_TRACE_NAME, TRAINING_TRACE_NAME
from ml.alpha_solver import AlphaConfig
from ml.build_dataset import DatasetManifest, generate
from ml.environment import PointMassEnv
from ml.errors import ConfigurationError, DimensionError, FormatError, SchemaVersionError, TrainingDivergence
from ml.inference import Policy
from ml.model import ModelShape, VectorFieldModel
from ml.train_model import (
    TrainConfig, evaluate_fm_loss, init_state, load_checkpoint, load_model, save_checkpoint,
    train_on_dataset, train_step,
)
from ml.weighting import baseline_mode


@pytest.fixture(scope="module")
def dataset():
    manifest = DatasetManifest(seed=1, num_tasks=2, trajectories_per_tier=2, episode_length=12, horizon=4)
    return generate(manifest)


def small_config(**changes):
    values = dict(
        total_steps=40, batch_size=8, horizon=4, hidden=16, warmup_steps=5, decay_steps=40,
        peak_lr=3e-3, decay_lr=3e-4, log_every=0, seed=2,
    )
    values.update(changes)
    return TrainConfig(**values)


def random_batch(shape, batch_size, rng):
    return {
        "obs": rng.standard_normal((batch_size, shape.obs_dim)),
        "clean": rng.standard_normal((batch_size, shape.horizon, shape.action_dim)),
        "advantages": rng.standard_normal(batch_size),
    }


# ---------------------------------------------------------
# Config
# ---------------------------------------------------------
def test_train_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(batch_size=1)
    with pytest.raises(ConfigurationError):
        TrainConfig(schedule="linear")
    with pytest.raises(ConfigurationError):
        TrainConfig(advantage_source="critic")
    assert TrainConfig(schedule="constant", learning_rate=0.1).learning_rate_at(500) == 0.1
    cfg = small_config()
    assert TrainConfig.from_section(cfg.to_section()) == cfg


# ---------------------------------------------------------
# Single steps
# ---------------------------------------------------------
def test_train_step_report_fields():
    shape = ModelShape(obs_dim=5, horizon=3, action_dim=2, hidden=8)
    cfg = small_config(horizon=3)
    state = init_state(VectorFieldModel(shape, seed=0), cfg)
    before = state.model.params.copy()

    report = train_step(state, random_batch(shape, 8, np.random.default_rng(0)), cfg, AlphaConfig(lam=1.0),
                        baseline_mode("arfm"))
    assert state.step == 1
    assert report.step == 0
    assert 0.01 <= report.alpha <= 5.0
    assert 0.0 < report.weight_entropy <= np.log(8) + 1e-12
    assert 1.0 <= report.ess <= 8.0
    assert report.clipped_grad_norm <= cfg.clip_norm + 1e-9
    assert report.lr == pytest.approx(cfg.learning_rate_at(0))
    assert not np.array_equal(before, state.model.params)


def test_vanilla_mode_uses_uniform_weights():
    shape = ModelShape(obs_dim=5, horizon=3, action_dim=2, hidden=8)
    cfg = small_config(horizon=3)
    state = init_state(VectorFieldModel(shape, seed=0), cfg)
    report = train_step(state, random_batch(shape, 8, np.random.default_rng(1)), cfg, AlphaConfig(),
                        baseline_mode("vanilla_fm"))
    assert report.alpha == 0.0
    assert report.ess == pytest.approx(8.0)
    assert report.iterations == 0


def test_equal_advantages_step_exactly_like_vanilla():
    shape = ModelShape(obs_dim=5, horizon=3, action_dim=2, hidden=8)
    cfg = small_config(horizon=3)
    batch = random_batch(shape, 8, np.random.default_rng(4))
    batch["advantages"] = np.full(8, 0.7)

    arfm = init_state(VectorFieldModel(shape, seed=0), cfg)
    vanilla = init_state(VectorFieldModel(shape, seed=0), cfg)
    arfm_report = train_step(arfm, batch, cfg, AlphaConfig(lam=1.0), baseline_mode("arfm"))
    vanilla_report = train_step(vanilla, batch, cfg, AlphaConfig(), baseline_mode("vanilla_fm"))

    assert arfm_report.alpha > 0.0
    assert arfm_report.loss == vanilla_report.loss
    np.testing.assert_array_equal(arfm.model.grad, vanilla.model.grad)
    np.testing.assert_array_equal(arfm.model.params, vanilla.model.params)


def test_non_finite_advantages_diverge():
    shape = ModelShape(obs_dim=5, horizon=3, action_dim=2, hidden=8)
    cfg = small_config(horizon=3)
    state = init_state(VectorFieldModel(shape, seed=0), cfg)
    batch = random_batch(shape, 4, np.random.default_rng(2))
    batch["advantages"][1] = np.nan
    with pytest.raises(TrainingDivergence) as info:
        train_step(state, batch, cfg, AlphaConfig(), baseline_mode("arfm"))
    assert info.value.step == 0
    assert state.step == 0


# ---------------------------------------------------------
# Full runs
# ---------------------------------------------------------
def test_vanilla_equals_arfm_pinned_at_zero(dataset):
    cfg = small_config(total_steps=15)
    vanilla = train_on_dataset(dataset, cfg, AlphaConfig(), baseline_mode("vanilla_fm"))
    pinned = train_on_dataset(dataset, cfg, AlphaConfig(alpha_min=0.0, alpha_max=0.0), baseline_mode("arfm"))
    np.testing.assert_array_equal(vanilla.model.params, pinned.model.params)
    assert [r.loss for r in vanilla.reports] == [r.loss for r in pinned.reports]


def test_loo_source_lets_alpha_move(dataset):
    cfg = small_config(total_steps=60, advantage_source="loo")
    state = train_on_dataset(dataset, cfg, AlphaConfig(lam=10.0), baseline_mode("arfm"))
    alphas = [r.alpha for r in state.reports]
    assert all(np.isfinite(alphas))
    assert not all(r.alpha_clipped for r in state.reports)
    assert max(alphas) > AlphaConfig().alpha_min


def test_every_step_respects_the_clip_norm(dataset):
    cfg = small_config(total_steps=50, clip_norm=0.5, peak_lr=1e-2)
    state = train_on_dataset(dataset, cfg, AlphaConfig(lam=1.0), baseline_mode("arfm"))
    assert len(state.reports) == 50
    for report in state.reports:
        assert report.clipped_grad_norm <= cfg.clip_norm + 1e-9
        assert report.clipped_grad_norm <= report.grad_norm + 1e-12
    # a tight clip actually bites on some steps
    assert any(r.grad_norm > cfg.clip_norm for r in state.reports)


def test_same_seed_same_run(dataset):
    cfg = small_config(total_steps=10)
    a = train_on_dataset(dataset, cfg, AlphaConfig(), baseline_mode("arfm"))
    b = train_on_dataset(dataset, cfg, AlphaConfig(), baseline_mode("arfm"))
    np.testing.assert_array_equal(a.model.params, b.model.params)
    assert [r.alpha for r in a.reports] == [r.alpha for r in b.reports]


def test_training_lowers_the_flow_matching_loss(dataset):
    cfg = small_config(total_steps=300, decay_steps=300)
    state = train_on_dataset(dataset, cfg, AlphaConfig(), baseline_mode("arfm"))
    losses = [r.mean_fm_loss for r in state.reports]
    assert np.mean(losses[-30:]) < np.mean(losses[:30])


def test_continuing_a_state_keeps_counting(dataset):
    cfg = small_config(total_steps=5)
    state = train_on_dataset(dataset, cfg, AlphaConfig(), baseline_mode("fixed_alpha", 0.5))
    state = train_on_dataset(dataset, cfg, AlphaConfig(), baseline_mode("fixed_alpha", 0.5), state=state)
    assert state.step == 10
    assert [r.step for r in state.reports] == list(range(10))
    assert all(r.alpha == 0.5 for r in state.reports)


def test_traces_are_written(tmp_path, dataset):
    train_on_dataset(dataset, small_config(total_steps=6), AlphaConfig(), baseline_mode("rwr"), out_dir=tmp_path)
    training = pd.read_csv(tmp_path / TRAINING_TRACE_NAME)
    alpha = pd.read_csv(tmp_path / ALPHA_TRACE_NAME)
    assert len(training) == len(alpha) == 6
    assert {"loss", "alpha", "weight_entropy", "ess", "grad_norm", "lr"} <= set(training.columns)
    assert {"sigma_r", "mu_l", "sigma_l", "iterations", "residual", "clipped", "degenerate"} <= set(alpha.columns)


def test_held_out_loss_is_finite(dataset):
    state = train_on_dataset(dataset, small_config(total_steps=3), AlphaConfig(), baseline_mode("arfm"))
    shape = state.model.shape
    batch = {
        "obs": np.zeros((4, shape.obs_dim)),
        "clean": np.zeros((4, shape.horizon, shape.action_dim)),
    }
    assert np.isfinite(evaluate_fm_loss(state.model, batch, np.random.default_rng(0)))


# ---------------------------------------------------------
# Checkpoints and policies
# ---------------------------------------------------------
def test_checkpoint_round_trip(tmp_path, dataset):
    cfg = small_config(total_steps=3)
    state = train_on_dataset(dataset, cfg, AlphaConfig(), baseline_mode("arfm"))
    path = save_checkpoint(tmp_path / "ckpt.joblib", state.model, cfg, state.step, AlphaConfig(),
                           baseline_mode("arfm"), optimizer=state.optimizer)
    model, payload = load_model(path)
    np.testing.assert_array_equal(model.params, state.model.params)
    assert payload["step"] == 3
    assert payload["mode"]["name"] == "arfm"
    assert payload["alpha_config"]["lambda"] == AlphaConfig().lam
    assert payload["optimizer"]["t"] == 3


def test_checkpoint_errors(tmp_path):
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "missing.joblib")

    joblib.dump({"hello": "world"}, tmp_path / "other.joblib")
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "other.joblib")

    shape = ModelShape(obs_dim=3, horizon=2, action_dim=2, hidden=4)
    path = save_checkpoint(tmp_path / "ckpt.joblib", VectorFieldModel(shape), small_config(horizon=2), 0)
    payload = joblib.load(path)
    payload["schema_version"] = 2
    joblib.dump(payload, path)
    with pytest.raises(SchemaVersionError):
        load_checkpoint(path)


def test_policy_from_checkpoint(tmp_path):
    env = PointMassEnv(num_tasks=2)
    shape = ModelShape(obs_dim=env.obs_dim, horizon=4, action_dim=2, hidden=8)
    path = save_checkpoint(tmp_path / "ckpt.joblib", VectorFieldModel(shape, seed=3), small_config(), 0)
    policy = Policy.from_checkpoint(path, euler_steps=5)
    policy.check_env(env)
    obs = env.reset(0, np.random.default_rng(0))
    chunk = policy.sample_chunk(obs, np.random.default_rng(1))
    assert chunk.shape == (4, 2)
    assert np.all(np.isfinite(chunk))
    with pytest.raises(DimensionError):
        policy.check_env(PointMassEnv(num_tasks=3))
