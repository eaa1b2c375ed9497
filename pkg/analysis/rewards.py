"""
Dense step rewards.

Each step is scored on a fixed set of components; the step reward is the
weighted sum. Image SSIM / ORB / gripper-image components have no built-in
formula: they are hook slots that stay at weight 0 unless a callable is
registered for them.
"""
from dataclasses import dataclass, asdict, fields

import numpy as np

from config.settings import build_section
from ml.errors import ConfigurationError, DimensionError

HOOK_SLOTS = ("image_ssim", "image_orb", "gripper_image")

_REWARD_HOOKS: dict = {}


@dataclass(frozen=True)
class RewardWeights:
    subgoal_image_mse: float = 0.1 / 13
    joint_position_mse: float = 0.1 / 13
    subgoal_division: float = 0.1 / 13
    joint_velocity: float = 0.1 / 13
    joint_acceleration: float = 0.1 / 13
    action_velocity: float = 0.01 / 13
    action_acceleration: float = 0.01 / 13
    task_success: float = 0.1 / 13
    image_ssim: float = 0.0
    image_orb: float = 0.0
    gripper_image: float = 0.0

    def __post_init__(self):
        negative = {k: v for k, v in asdict(self).items() if v < 0}
        if negative:
            raise ConfigurationError(f"reward weights must be >= 0, got {negative}")

    @classmethod
    def from_section(cls, section: dict | None) -> "RewardWeights":
        return build_section(cls, section, "rewards")

    def enabled(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) > 0}


@dataclass
class StepReward:
    total: float
    breakdown: dict


# ---------------------------------------------------------
# Hooks
# ---------------------------------------------------------
def register_reward_hook(name: str, fn) -> None:
    """
    fn(position, observation, subgoal_position, subgoal_observation) -> float.
    """
    if name not in HOOK_SLOTS:
        raise ConfigurationError(f"unknown reward hook slot '{name}', expected one of {HOOK_SLOTS}")
    _REWARD_HOOKS[name] = fn


def clear_reward_hooks() -> None:
    _REWARD_HOOKS.clear()


def _hook_components(weights: RewardWeights, position, observation, subgoal, subgoal_obs) -> dict:
    values = {}
    for slot in HOOK_SLOTS:
        if getattr(weights, slot) <= 0:
            continue
        if slot not in _REWARD_HOOKS:
            raise ConfigurationError(f"reward slot '{slot}' has positive weight but no registered hook")
        values[slot] = float(_REWARD_HOOKS[slot](position, observation, subgoal, subgoal_obs))
    return values


# ---------------------------------------------------------
# Components
# ---------------------------------------------------------
def _mse(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def image_similarity(features, subgoal_features) -> float:
    return float(np.exp(-_mse(features, subgoal_features)))


def subgoal_division(achieved: int, total: int) -> float:
    if total < 1:
        raise ConfigurationError(f"need at least one sub-goal, got {total}")
    return min(achieved, total) / total


def smoothness_terms(prev2_action, prev_action, action, joint_vel, joint_acc) -> dict:
    action = np.asarray(action, dtype=float)
    for other in (prev_action, prev2_action):
        if other is not None and np.asarray(other).shape != action.shape:
            raise DimensionError(f"action shapes differ: {np.asarray(other).shape} vs {action.shape}")

    joint_vel = np.asarray(joint_vel, dtype=float)
    joint_acc = np.asarray(joint_acc, dtype=float)
    terms = {
        "joint_velocity": -float(joint_vel @ joint_vel),
        "joint_acceleration": -float(joint_acc @ joint_acc),
        "action_velocity": 0.0,
        "action_acceleration": 0.0,
    }
    if prev_action is not None:
        diff = np.asarray(prev_action, dtype=float) - action
        terms["action_velocity"] = -float(diff @ diff)
        if prev2_action is not None:
            second = np.asarray(prev2_action, dtype=float) - 2.0 * np.asarray(prev_action, dtype=float) + action
            terms["action_acceleration"] = -float(second @ second)
    return terms


def step_reward(components: dict, weights: RewardWeights) -> StepReward:
    breakdown = {}
    for name, weight in weights.enabled().items():
        if name not in components:
            raise ConfigurationError(f"no value for reward component '{name}' (weight {weight:.4g})")
        breakdown[name] = weight * float(components[name])
    return StepReward(total=float(sum(breakdown.values())), breakdown=breakdown)


# ---------------------------------------------------------
# Trajectory labelling
# ---------------------------------------------------------
def label_trajectory(env, task_id: int, positions, actions, success: bool,
                     weights: RewardWeights | None = None) -> tuple:
    """
    Dense rewards for one episode.

    `positions` holds q_0..q_T (T + 1 rows), `actions` the executed
    velocities a_0..a_{T-1}. Sub-goals are reached in order; the similarity
    terms compare q_{t+1} with the sub-goal being pursued at step t.
    Returns (rewards, breakdowns).
    """
    weights = weights or RewardWeights()
    positions = np.asarray(positions, dtype=float)
    actions = np.asarray(actions, dtype=float)
    n_steps = actions.shape[0]
    if positions.shape[0] != n_steps + 1:
        raise DimensionError(f"{positions.shape[0]} positions for {n_steps} actions, expected {n_steps + 1}")

    subgoals = env.subgoals(positions[0], task_id)
    subgoal_obs = [env.observe(s, task_id) for s in subgoals]
    joint_vel = np.diff(positions, axis=0) / env.dt
    reached = 0
    rewards = np.zeros(n_steps)
    breakdowns = []

    for t in range(n_steps):
        current = min(reached, len(subgoals) - 1)
        q_next = positions[t + 1]
        obs_next = env.observe(q_next, task_id)
        while reached < len(subgoals) and np.linalg.norm(q_next - subgoals[reached]) < env.subgoal_radius:
            reached += 1

        joint_acc = (joint_vel[t] - joint_vel[t - 1]) / env.dt if t > 0 else np.zeros_like(joint_vel[t])
        components = smoothness_terms(
            actions[t - 2] if t >= 2 else None,
            actions[t - 1] if t >= 1 else None,
            actions[t], joint_vel[t], joint_acc,
        )
        components.update({
            "subgoal_image_mse": image_similarity(
                env.image_features(q_next), env.image_features(subgoals[current])
            ),
            "joint_position_mse": float(np.exp(-_mse(q_next, subgoals[current]))),
            "subgoal_division": subgoal_division(reached, len(subgoals)),
            "task_success": 1.0 if success else 0.0,
        })
        components.update(_hook_components(weights, q_next, obs_next, subgoals[current], subgoal_obs[current]))

        result = step_reward(components, weights)
        rewards[t] = result.total
        breakdowns.append(result.breakdown)

    return rewards, breakdowns
