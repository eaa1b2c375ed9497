import numpy as np
import pytest

from analysis.rewards import (
    RewardWeights, clear_reward_hooks, image_similarity, label_trajectory, register_reward_hook,
    smoothness_terms, step_reward, subgoal_division,
)
from ml.environment import PointMassEnv
from ml.errors import ConfigurationError, DimensionError


@pytest.fixture(autouse=True)
def no_hooks():
    clear_reward_hooks()
    yield
    clear_reward_hooks()


@pytest.fixture
def env():
    return PointMassEnv(num_tasks=4, episode_length=16)


def expert_episode(env, task_id=0):
    env.reset(task_id, np.random.default_rng(0), start=np.zeros(2))
    positions, actions = [env.q.copy()], []
    for t in range(env.episode_length):
        action = env.expert_action(env.q, env.start, task_id, t)
        env.step(action)
        actions.append(action)
        positions.append(env.q.copy())
    return np.array(positions), np.array(actions)


def test_default_weights_and_validation():
    weights = RewardWeights()
    assert weights.subgoal_image_mse == pytest.approx(0.1 / 13)
    assert weights.action_velocity == pytest.approx(0.01 / 13)
    assert "image_ssim" not in weights.enabled()
    with pytest.raises(ConfigurationError):
        RewardWeights(task_success=-1.0)
    with pytest.raises(ConfigurationError):
        RewardWeights.from_section({"made_up": 1.0})


def test_component_formulas():
    assert image_similarity([1.0, 2.0], [1.0, 2.0]) == 1.0
    assert subgoal_division(2, 4) == 0.5
    assert subgoal_division(9, 4) == 1.0
    with pytest.raises(ConfigurationError):
        subgoal_division(0, 0)


def test_smoothness_terms():
    terms = smoothness_terms([0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [3.0, 4.0], [0.0, 1.0])
    assert terms["joint_velocity"] == -25.0
    assert terms["joint_acceleration"] == -1.0
    assert terms["action_velocity"] == -1.0
    # a_{t-2} - 2 a_{t-1} + a_t = (-1, 1)
    assert terms["action_acceleration"] == -2.0

    first = smoothness_terms(None, None, [1.0, 1.0], [0.0, 0.0], [0.0, 0.0])
    assert first["action_velocity"] == 0.0 and first["action_acceleration"] == 0.0
    with pytest.raises(DimensionError):
        smoothness_terms(None, [1.0], [1.0, 1.0], [0.0, 0.0], [0.0, 0.0])


def test_step_reward_is_weighted_sum():
    weights = RewardWeights(
        subgoal_image_mse=1.0, joint_position_mse=0.0, subgoal_division=0.0, joint_velocity=0.0,
        joint_acceleration=0.0, action_velocity=0.0, action_acceleration=0.0, task_success=2.0,
    )
    result = step_reward({"subgoal_image_mse": 0.5, "task_success": 1.0, "ignored": 99.0}, weights)
    assert result.total == 2.5
    assert result.breakdown == {"subgoal_image_mse": 0.5, "task_success": 2.0}
    with pytest.raises(ConfigurationError):
        step_reward({"subgoal_image_mse": 0.5}, weights)


def test_hook_slots():
    with pytest.raises(ConfigurationError):
        register_reward_hook("lidar", lambda *args: 0.0)


def test_label_trajectory_shapes_and_progress(env):
    positions, actions = expert_episode(env)
    rewards, breakdowns = label_trajectory(env, 0, positions, actions, success=True)
    assert rewards.shape == (env.episode_length,)
    assert len(breakdowns) == env.episode_length
    progress = [b["subgoal_division"] / RewardWeights().subgoal_division for b in breakdowns]
    assert all(a <= b for a, b in zip(progress, progress[1:]))
    assert progress[-1] == pytest.approx(1.0)


def test_success_flag_raises_every_step(env):
    positions, actions = expert_episode(env)
    won, _ = label_trajectory(env, 0, positions, actions, success=True)
    lost, _ = label_trajectory(env, 0, positions, actions, success=False)
    np.testing.assert_allclose(won - lost, RewardWeights().task_success)


def test_label_trajectory_length_mismatch(env):
    positions, actions = expert_episode(env)
    with pytest.raises(DimensionError):
        label_trajectory(env, 0, positions[:-1], actions, success=True)


def test_enabled_hook_slot_needs_a_hook(env):
    positions, actions = expert_episode(env)
    weights = RewardWeights(image_ssim=0.5)
    with pytest.raises(ConfigurationError):
        label_trajectory(env, 0, positions, actions, success=True, weights=weights)

    register_reward_hook("image_ssim", lambda q, obs, sub_q, sub_obs: 1.0)
    with_hook, breakdowns = label_trajectory(env, 0, positions, actions, success=True, weights=weights)
    without, _ = label_trajectory(env, 0, positions, actions, success=True)
    np.testing.assert_allclose(with_hook - without, 0.5)
    assert breakdowns[0]["image_ssim"] == 0.5
