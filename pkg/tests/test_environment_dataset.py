import json

import numpy as np
import pytest

from ml import build_dataset
from ml.build_dataset import (
    DatasetManifest, TIERS, generate, iterate_batches, make_batches, prepare_samples,
)
from ml.environment import N_IMAGE, PointMassEnv
from ml.errors import ConfigurationError, DimensionError, DomainError, ParseError, SchemaVersionError


@pytest.fixture(scope="module")
def manifest():
    return DatasetManifest(seed=3, num_tasks=2, trajectories_per_tier=4, episode_length=16, horizon=4)


@pytest.fixture(scope="module")
def dataset(manifest):
    return generate(manifest)


# ---------------------------------------------------------
# Environment
# ---------------------------------------------------------
def test_observation_layout():
    env = PointMassEnv(num_tasks=4)
    obs = env.reset(2, np.random.default_rng(0), start=[0.1, -0.2])
    assert env.obs_dim == 15
    assert obs.shape == (15,)
    np.testing.assert_allclose(obs[N_IMAGE:N_IMAGE + 2], [0.1, -0.2])
    assert obs[N_IMAGE + 2:].tolist() == [0.0, 0.0, 1.0, 0.0]
    assert np.all((obs[:N_IMAGE] > 0) & (obs[:N_IMAGE] <= 1))


def test_goals_lie_on_the_circle():
    env = PointMassEnv(num_tasks=4, goal_radius=1.0)
    np.testing.assert_allclose(env.goal(0), [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(env.goal(1), [0.0, 1.0], atol=1e-12)
    with pytest.raises(DomainError):
        env.goal(4)


def test_noiseless_expert_reaches_the_goal():
    env = PointMassEnv(num_tasks=3, episode_length=20)
    env.reset(1, np.random.default_rng(5))
    done = False
    while not done:
        _, done = env.step(env.expert_action(env.q, env.start, 1, env.t))
    assert env.t == 20
    assert env.goal_distance(env.q, 1) < 1e-9
    assert env.success()


def test_subgoals_end_at_the_goal():
    env = PointMassEnv(num_tasks=2, num_subgoals=4)
    subgoals = env.subgoals([0.0, 0.0], 0)
    assert subgoals.shape == (4, 2)
    np.testing.assert_allclose(subgoals[0], [0.25, 0.0])
    np.testing.assert_allclose(subgoals[-1], env.goal(0))


def test_step_checks_action_shape():
    env = PointMassEnv(num_tasks=1)
    env.reset(0, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        env.step([1.0, 2.0, 3.0])


# ---------------------------------------------------------
# Manifest and generation
# ---------------------------------------------------------
def test_manifest_validation():
    with pytest.raises(ConfigurationError):
        DatasetManifest(trajectories_per_tier=0)
    with pytest.raises(ConfigurationError):
        DatasetManifest(action_dim=3)
    with pytest.raises(ConfigurationError):
        DatasetManifest(episode_length=4, horizon=8)
    with pytest.raises(ConfigurationError):
        DatasetManifest.from_section({"num_taks": 3})


def test_tier_counts_largest_remainder():
    assert DatasetManifest(trajectories_per_tier=4).tier_counts() == {"expert": 4, "medium": 4, "poor": 4}
    counts = DatasetManifest(trajectories_per_tier=1, tier_proportions=(0.5, 0.3, 0.2)).tier_counts()
    assert sum(counts.values()) == 3
    assert counts["expert"] >= counts["medium"] >= counts["poor"]


def test_generate_counts_and_shapes(manifest, dataset):
    assert len(dataset) == manifest.num_tasks * 3 * manifest.trajectories_per_tier
    for trajectory in dataset.trajectories:
        assert trajectory.quality_tier in TIERS
        assert trajectory.observations.shape == (16, manifest.obs_dim)
        assert trajectory.actions.shape == (16, 2)
        assert trajectory.joint_states.shape == (16, 2)
        assert trajectory.rewards.shape == (16,)


def test_generate_is_deterministic(manifest, dataset):
    again = generate(manifest)
    for a, b in zip(dataset.trajectories, again.trajectories):
        np.testing.assert_array_equal(a.actions, b.actions)
        np.testing.assert_array_equal(a.rewards, b.rewards)


def test_quality_tiers_are_ordered(dataset):
    by_tier = {tier: [tr for tr in dataset.trajectories if tr.quality_tier == tier] for tier in TIERS}
    assert all(tr.success for tr in by_tier["expert"])
    mean_return = {tier: np.mean([tr.rewards.sum() for tr in trs]) for tier, trs in by_tier.items()}
    assert mean_return["expert"] > mean_return["medium"] > mean_return["poor"]
    mean_distance = {tier: np.mean([tr.final_distance for tr in trs]) for tier, trs in by_tier.items()}
    assert mean_distance["expert"] < mean_distance["poor"]


@pytest.mark.parametrize("seed", range(20))
def test_tier_ordering_of_mean_advantage_holds_for_every_seed(seed):
    dataset = generate(DatasetManifest(seed=seed))
    samples = prepare_samples(dataset, horizon=dataset.manifest.horizon, verbose=False)
    tiers = np.array([dataset.trajectories[i].quality_tier for i in samples.trajectory_index])
    mean_advantage = {tier: samples.advantages[tiers == tier].mean() for tier in TIERS}
    assert mean_advantage["expert"] > mean_advantage["medium"] > mean_advantage["poor"]


def test_subset_and_task_filter(dataset):
    assert len(dataset.subset([0, 1])) == 2
    only_one = dataset.for_tasks([1])
    assert {tr.task_id for tr in only_one.trajectories} == {1}


# ---------------------------------------------------------
# JSONL persistence
# ---------------------------------------------------------
def test_save_load_preserves_values(tmp_path, dataset):
    path = build_dataset.save(dataset, tmp_path / "d.jsonl")
    loaded = build_dataset.load(path)
    assert loaded.manifest == dataset.manifest
    assert len(loaded) == len(dataset)
    first, again = dataset.trajectories[0], loaded.trajectories[0]
    np.testing.assert_array_equal(first.observations, again.observations)
    np.testing.assert_array_equal(first.rewards, again.rewards)
    assert (first.success, first.quality_tier) == (again.success, again.quality_tier)


def test_load_rejects_empty_and_malformed_files(tmp_path, dataset):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(ParseError):
        build_dataset.load(empty)

    path = build_dataset.save(dataset.subset([0, 1]), tmp_path / "d.jsonl")
    lines = path.read_text().splitlines()
    broken = tmp_path / "broken.jsonl"
    broken.write_text("\n".join([lines[0], "{not json", lines[2]]) + "\n")
    with pytest.raises(ParseError) as info:
        build_dataset.load(broken)
    assert info.value.line_number == 2

    truncated = tmp_path / "truncated.jsonl"
    truncated.write_text("\n".join(lines[:2]) + "\n")
    with pytest.raises(ParseError):
        build_dataset.load(truncated)


def test_load_rejects_other_schema_versions(tmp_path, dataset):
    path = build_dataset.save(dataset.subset([0]), tmp_path / "d.jsonl")
    lines = path.read_text().splitlines()
    header = json.loads(lines[0])
    header["schema_version"] = 99
    path.write_text("\n".join([json.dumps(header), lines[1]]) + "\n")
    with pytest.raises(SchemaVersionError):
        build_dataset.load(path)


# ---------------------------------------------------------
# Samples and batches
# ---------------------------------------------------------
def test_prepare_samples_windows(dataset):
    samples = prepare_samples(dataset, horizon=4, verbose=False)
    assert len(samples) == len(dataset) * (16 - 4 + 1)
    assert samples.chunks.shape[1:] == (4, 2)
    row = 5
    trajectory = dataset.trajectories[samples.trajectory_index[row]]
    t = samples.t[row]
    np.testing.assert_array_equal(samples.chunks[row], trajectory.actions[t:t + 4])
    np.testing.assert_array_equal(samples.obs[row], trajectory.observations[t])


def test_short_trajectories_are_excluded(dataset, capsys):
    short = build_dataset.Dataset(dataset.manifest, list(dataset.trajectories))
    clipped = short.trajectories[0]
    short.trajectories[0] = build_dataset.Trajectory(
        task_id=clipped.task_id, observations=clipped.observations[:2], actions=clipped.actions[:2],
        joint_states=clipped.joint_states[:2], rewards=clipped.rewards[:2], success=False,
        quality_tier=clipped.quality_tier,
    )
    samples = prepare_samples(short, horizon=4)
    assert 0 not in set(samples.trajectory_index.tolist())
    assert "[WARN]" in capsys.readouterr().out

    with pytest.raises(DomainError):
        prepare_samples(short.subset([0]), horizon=4, verbose=False)


def test_batches_carry_no_tier_and_are_reproducible(dataset):
    a = next(make_batches(dataset, 8, 4, seed=11, verbose=False))
    b = next(make_batches(dataset, 8, 4, seed=11, verbose=False))
    assert set(a) == {"obs", "clean", "advantages", "task_ids"}
    assert a["clean"].shape == (8, 4, 2)
    np.testing.assert_array_equal(a["clean"], b["clean"])


def test_iterate_batches_is_endless(dataset):
    samples = prepare_samples(dataset, horizon=4, verbose=False)
    stream = iterate_batches(samples, 4, seed=0)
    for _ in range(50):
        assert next(stream)["obs"].shape == (4, samples.obs.shape[1])
