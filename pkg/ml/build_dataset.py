"""
Mixed-quality synthetic demonstration datasets.

Every task gets trajectories from three quality tiers that share the
minimum-jerk feedback controller and differ in execution noise; the poor
tier also stops commanding motion part-way through the episode. Steps are
labelled with dense rewards at generation time. The tier is generator
metadata only: batches never carry it.

File format: JSON lines. Line 1 is a header echoing the manifest, every
following line is one trajectory. Floats are written with repr precision,
so load(save(d)) reproduces every value exactly.
"""
import json
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np

from analysis.advantage import advantages_for, return_to_go
from analysis.rewards import RewardWeights, label_trajectory
from config.paths import DATASET_NAME
from config.settings import build_section, plain
from ml.environment import PointMassEnv, STATE_DIM
from ml.errors import ConfigurationError, DomainError, ParseError, SchemaVersionError
from ml.flow import chunk_from_actions

DATASET_SCHEMA_VERSION = 1
TIERS = ("expert", "medium", "poor")


@dataclass(frozen=True)
class DatasetManifest:
    seed: int = 0
    num_tasks: int = 4
    trajectories_per_tier: int = 8
    tier_proportions: tuple = (1 / 3, 1 / 3, 1 / 3)
    episode_length: int = 32
    horizon: int = 8
    action_dim: int = 2
    dt: float = 0.1
    noise_scales: tuple = (0.0, 0.3, 1.0)
    goal_threshold: float = 0.05
    goal_radius: float = 1.0
    start_jitter: float = 0.2
    early_stop_range: tuple = (0.4, 0.7)
    num_subgoals: int = 4
    subgoal_radius: float = 0.1

    def __post_init__(self):
        if self.num_tasks < 1:
            raise ConfigurationError(f"num_tasks must be >= 1, got {self.num_tasks}")
        if self.trajectories_per_tier < 1:
            raise ConfigurationError("zero trajectories requested: trajectories_per_tier must be >= 1")
        if len(self.noise_scales) != len(TIERS) or len(self.tier_proportions) != len(TIERS):
            raise ConfigurationError(f"noise_scales and tier_proportions need one entry per tier {TIERS}")
        if any(p < 0 for p in self.tier_proportions) or sum(self.tier_proportions) <= 0:
            raise ConfigurationError(f"tier_proportions must be non-negative, got {self.tier_proportions}")
        if self.action_dim != STATE_DIM:
            raise ConfigurationError(f"the point mass has action_dim {STATE_DIM}, got {self.action_dim}")
        if self.episode_length < self.horizon:
            raise ConfigurationError(
                f"episode_length {self.episode_length} shorter than horizon {self.horizon}"
            )

    @classmethod
    def from_section(cls, section: dict | None) -> "DatasetManifest":
        return build_section(cls, section, "manifest")

    def to_section(self) -> dict:
        return plain(asdict(self))

    @property
    def obs_dim(self) -> int:
        return PointMassEnv.from_manifest(self).obs_dim

    def tier_counts(self) -> dict:
        """Trajectories per tier for one task; proportions scale a total of 3 * trajectories_per_tier."""
        total = len(TIERS) * self.trajectories_per_tier
        weights = np.asarray(self.tier_proportions, dtype=float)
        weights = weights / weights.sum()
        counts = np.floor(weights * total).astype(int)
        # largest remainders first, ties broken by tier order
        for i in np.argsort(-(weights * total - counts), kind="stable")[: total - counts.sum()]:
            counts[i] += 1
        return dict(zip(TIERS, counts.tolist()))


@dataclass
class Trajectory:
    task_id: int
    observations: np.ndarray
    actions: np.ndarray
    joint_states: np.ndarray
    rewards: np.ndarray
    success: bool
    quality_tier: str
    final_distance: float = 0.0

    def __len__(self):
        return self.actions.shape[0]


@dataclass
class Dataset:
    manifest: DatasetManifest
    trajectories: list = field(default_factory=list)

    def __len__(self):
        return len(self.trajectories)

    def subset(self, indices) -> "Dataset":
        return Dataset(self.manifest, [self.trajectories[i] for i in indices])

    def for_tasks(self, task_ids) -> "Dataset":
        wanted = set(int(t) for t in task_ids)
        return Dataset(self.manifest, [tr for tr in self.trajectories if tr.task_id in wanted])


# ---------------------------------------------------------
# Generation
# ---------------------------------------------------------
def rollout_demonstration(env: PointMassEnv, task_id: int, noise_scale: float,
                          rng: np.random.Generator, stop_fraction: float | None = None) -> tuple:
    """Returns (observations, executed actions, positions q_0..q_T)."""
    env.reset(task_id, rng)
    start = env.start.copy()
    stop_step = None if stop_fraction is None else int(np.floor(stop_fraction * env.episode_length))

    observations, actions, positions = [], [], [env.q.copy()]
    for t in range(env.episode_length):
        observations.append(env.observe(env.q, task_id))
        if stop_step is not None and t >= stop_step:
            command = np.zeros(STATE_DIM)
        else:
            command = env.expert_action(env.q, start, task_id, t)
        executed = command + noise_scale * rng.standard_normal(STATE_DIM)
        env.step(executed)
        actions.append(executed)
        positions.append(env.q.copy())
    return np.array(observations), np.array(actions), np.array(positions)


def generate(manifest: DatasetManifest, weights: RewardWeights | None = None) -> Dataset:
    env = PointMassEnv.from_manifest(manifest)
    rng = np.random.default_rng(manifest.seed)
    counts = manifest.tier_counts()
    if sum(counts.values()) == 0:
        raise ConfigurationError("zero trajectories requested")

    trajectories = []
    for task_id in range(manifest.num_tasks):
        for tier, noise_scale in zip(TIERS, manifest.noise_scales):
            for _ in range(counts[tier]):
                stop = rng.uniform(*manifest.early_stop_range) if tier == "poor" else None
                obs, actions, positions = rollout_demonstration(env, task_id, noise_scale, rng, stop)
                distance = env.goal_distance(positions[-1], task_id)
                success = distance < manifest.goal_threshold
                rewards, _ = label_trajectory(env, task_id, positions, actions, success, weights)
                trajectories.append(Trajectory(
                    task_id=task_id, observations=obs, actions=actions, joint_states=positions[:-1],
                    rewards=rewards, success=bool(success), quality_tier=tier,
                    final_distance=float(distance),
                ))
    return Dataset(manifest, trajectories)


# ---------------------------------------------------------
# Persistence
# ---------------------------------------------------------
def _encode(trajectory: Trajectory) -> dict:
    return {
        "schema_version": DATASET_SCHEMA_VERSION,
        "task_id": int(trajectory.task_id),
        "length": len(trajectory),
        "obs_dim": int(trajectory.observations.shape[1]),
        "action_dim": int(trajectory.actions.shape[1]),
        "state_dim": int(trajectory.joint_states.shape[1]),
        "observations": trajectory.observations.ravel().tolist(),
        "actions": trajectory.actions.ravel().tolist(),
        "joint_states": trajectory.joint_states.ravel().tolist(),
        "rewards": trajectory.rewards.tolist(),
        "success": bool(trajectory.success),
        "quality_tier": trajectory.quality_tier,
        "final_distance": float(trajectory.final_distance),
    }


def _decode(record: dict) -> Trajectory:
    n = record["length"]
    return Trajectory(
        task_id=int(record["task_id"]),
        observations=np.array(record["observations"], dtype=float).reshape(n, record["obs_dim"]),
        actions=np.array(record["actions"], dtype=float).reshape(n, record["action_dim"]),
        joint_states=np.array(record["joint_states"], dtype=float).reshape(n, record["state_dim"]),
        rewards=np.array(record["rewards"], dtype=float).reshape(n),
        success=bool(record["success"]),
        quality_tier=record["quality_tier"],
        final_distance=float(record["final_distance"]),
    )


def _dumps(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"), allow_nan=False)


def save(dataset: Dataset, path) -> Path:
    path = Path(path)
    if path.is_dir():
        path = path / DATASET_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "schema_version": DATASET_SCHEMA_VERSION,
        "kind": "manifest",
        "manifest": dataset.manifest.to_section(),
        "count": len(dataset),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(_dumps(header) + "\n")
        for trajectory in dataset.trajectories:
            f.write(_dumps(_encode(trajectory)) + "\n")
    return path


def _check_version(record: dict, line_number: int):
    version = record.get("schema_version")
    if version != DATASET_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"line {line_number}: schema_version {version} != {DATASET_SCHEMA_VERSION}"
        )


def load(path) -> Dataset:
    path = Path(path)
    if path.is_dir():
        path = path / DATASET_NAME
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError(f"{path} is empty", line_number=1)

    records = []
    for line_number, line in enumerate(lines, start=1):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}:{line_number}: {e.msg}", line_number=line_number)
        if not isinstance(record, dict):
            raise ParseError(f"{path}:{line_number}: expected a JSON object", line_number=line_number)
        _check_version(record, line_number)
        records.append(record)

    header = records[0]
    if header.get("kind") != "manifest":
        raise ParseError(f"{path}:1: missing manifest header", line_number=1)
    manifest = DatasetManifest.from_section(header["manifest"])

    trajectories = []
    for line_number, record in enumerate(records[1:], start=2):
        try:
            trajectories.append(_decode(record))
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"{path}:{line_number}: malformed trajectory ({e})", line_number=line_number)
    if len(trajectories) != header.get("count"):
        raise ParseError(
            f"{path}: header announces {header.get('count')} trajectories, found {len(trajectories)}",
            line_number=len(lines),
        )
    return Dataset(manifest, trajectories)


# ---------------------------------------------------------
# Batches
# ---------------------------------------------------------
@dataclass
class SampleTable:
    """Every (o_t, A_t, R*_t) with 0 <= t <= T - H of the eligible trajectories."""
    obs: np.ndarray
    chunks: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    task_ids: np.ndarray
    trajectory_index: np.ndarray
    t: np.ndarray

    def __len__(self):
        return self.obs.shape[0]


def prepare_samples(dataset: Dataset, horizon: int, advantage_source: str = "standardized",
                    verbose: bool = True) -> SampleTable:
    """R* is computed once over every step of the eligible trajectories, grouped by task."""
    eligible = []
    for i, trajectory in enumerate(dataset.trajectories):
        if len(trajectory) < horizon:
            if verbose:
                print(f"[WARN] trajectory {i} (task {trajectory.task_id}) has {len(trajectory)} steps < H={horizon}; excluded")
            continue
        eligible.append(i)
    if not eligible:
        raise DomainError(f"no trajectory is at least H={horizon} steps long")

    step_returns, step_tasks = [], []
    for i in eligible:
        trajectory = dataset.trajectories[i]
        step_returns.append(return_to_go(trajectory.rewards))
        step_tasks.append(np.full(len(trajectory), trajectory.task_id))
    all_advantages = advantages_for(np.concatenate(step_returns), np.concatenate(step_tasks), advantage_source)

    obs, chunks, advantages, returns, task_ids, index, times = [], [], [], [], [], [], []
    offset = 0
    for i, rtg in zip(eligible, step_returns):
        trajectory = dataset.trajectories[i]
        for t in range(len(trajectory) - horizon + 1):
            obs.append(trajectory.observations[t])
            chunks.append(chunk_from_actions(trajectory.actions, t, horizon))
            advantages.append(all_advantages[offset + t])
            returns.append(rtg[t])
            task_ids.append(trajectory.task_id)
            index.append(i)
            times.append(t)
        offset += len(trajectory)

    return SampleTable(
        obs=np.array(obs), chunks=np.array(chunks), advantages=np.array(advantages),
        returns=np.array(returns), task_ids=np.array(task_ids),
        trajectory_index=np.array(index), t=np.array(times),
    )


def iterate_batches(samples: SampleTable, batch_size: int, seed: int):
    """Endless stream of batches drawn uniformly with replacement."""
    rng = np.random.default_rng(seed)
    while True:
        idx = rng.integers(0, len(samples), size=batch_size)
        yield {
            "obs": samples.obs[idx],
            "clean": samples.chunks[idx],
            "advantages": samples.advantages[idx],
            "task_ids": samples.task_ids[idx],
        }


def make_batches(dataset: Dataset, batch_size: int, horizon: int, seed: int,
                 advantage_source: str = "standardized", verbose: bool = True):
    samples = prepare_samples(dataset, horizon, advantage_source, verbose=verbose)
    return iterate_batches(samples, batch_size, seed)


if __name__ == "__main__":
    from config.paths import output_root

    target = save(generate(DatasetManifest()), output_root() / "gen-data")
    print(f"[OK] Dataset written to: {target}")
