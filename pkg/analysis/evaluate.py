"""
Closed-loop evaluation in the point-mass environment: success rate,
final goal distance and binomial standard errors per action-noise level,
plus the negative-backward-transfer metric for continual protocols.
"""
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from config.settings import build_section
from ml.errors import ConfigurationError, DomainError

BENCHMARK_NOISE_GRID = (0.1, 0.15, 0.2, 0.25, 0.3)


@dataclass(frozen=True)
class EvalConfig:
    episodes: int = 100
    noise_levels: tuple = (0.0,)
    benchmark_grid: bool = False
    success_threshold: float = 0.05
    euler_steps: int = 10
    exec_horizon: int = 4
    seed: int = 1234

    def __post_init__(self):
        if self.episodes < 0:
            raise ConfigurationError(f"episodes must be >= 0, got {self.episodes}")
        if self.euler_steps < 1 or self.exec_horizon < 1:
            raise ConfigurationError("euler_steps and exec_horizon must be >= 1")
        if any(level < 0 for level in self.noise_levels):
            raise ConfigurationError(f"noise levels must be >= 0, got {self.noise_levels}")

    @classmethod
    def from_section(cls, section: dict | None) -> "EvalConfig":
        return build_section(cls, section, "eval")

    def levels(self) -> tuple:
        return BENCHMARK_NOISE_GRID if self.benchmark_grid else tuple(self.noise_levels)


@dataclass
class EvalReport:
    rows: pd.DataFrame
    zero_episodes: bool = False
    sr_matrix: np.ndarray | None = None
    nbt: float | None = None
    extra: dict = field(default_factory=dict)

    def overall(self) -> pd.DataFrame:
        """Success rate and goal error per noise level, pooled over tasks."""
        if self.rows.empty:
            return self.rows
        grouped = self.rows.groupby("noise_level", as_index=False).agg(
            episodes=("episodes", "sum"), successes=("successes", "sum"),
            mean_goal_distance=("mean_goal_distance", "mean"),
        )
        grouped["success_rate"] = grouped["successes"] / grouped["episodes"]
        grouped["success_se"] = [
            binomial_se(p, n) for p, n in zip(grouped["success_rate"], grouped["episodes"])
        ]
        return grouped


REPORT_COLUMNS = [
    "noise_level", "task_id", "episodes", "successes", "success_rate", "success_se",
    "mean_goal_distance",
]


def binomial_se(p: float, n: int) -> float:
    if n <= 0:
        return float("nan")
    return float(np.sqrt(p * (1.0 - p) / n))


# ---------------------------------------------------------
# Rollouts
# ---------------------------------------------------------
def rollout_episode(policy, env, task_id: int, noise_level: float, cfg: EvalConfig,
                    rng: np.random.Generator) -> float:
    """
    Receding-horizon rollout: sample a chunk, execute its first
    `exec_horizon` actions with Gaussian noise added to each executed
    action, re-plan. Returns the final goal distance.
    """
    obs = env.reset(task_id, rng)
    done = False
    while not done:
        chunk = policy.sample_chunk(obs, rng)
        for action in chunk[: cfg.exec_horizon]:
            noise = noise_level * rng.standard_normal(action.shape) if noise_level > 0 else None
            obs, done = env.step(action, noise)
            if done:
                break
    return env.goal_distance(env.q, task_id)


def evaluate_policy(policy, env, cfg: EvalConfig, tasks=None, verbose: bool = False) -> EvalReport:
    policy.check_env(env)
    tasks = list(range(env.num_tasks)) if tasks is None else [int(t) for t in tasks]
    levels = cfg.levels()

    if cfg.episodes == 0:
        return EvalReport(rows=pd.DataFrame(columns=REPORT_COLUMNS), zero_episodes=True)

    rows = []
    for level in levels:
        for task_id in tasks:
            # one stream per (level, task) so subsets of tasks reproduce the full sweep
            rng = np.random.default_rng([cfg.seed, int(round(level * 1e6)), task_id])
            distances = np.array([
                rollout_episode(policy, env, task_id, level, cfg, rng) for _ in range(cfg.episodes)
            ])
            successes = int(np.sum(distances < cfg.success_threshold))
            rate = successes / cfg.episodes
            rows.append({
                "noise_level": level, "task_id": task_id, "episodes": cfg.episodes,
                "successes": successes, "success_rate": rate,
                "success_se": binomial_se(rate, cfg.episodes),
                "mean_goal_distance": float(distances.mean()),
            })
            if verbose:
                print(f"[INFO] noise={level:.2f} task={task_id}: SR={rate:.3f} goal_err={distances.mean():.4f}")

    return EvalReport(rows=pd.DataFrame(rows, columns=REPORT_COLUMNS))


def success_rate(report: EvalReport, tasks=None, noise_level: float | None = None) -> float:
    rows = report.rows
    if rows.empty:
        return float("nan")
    if noise_level is not None:
        rows = rows[np.isclose(rows["noise_level"], noise_level)]
    if tasks is not None:
        rows = rows[rows["task_id"].isin(list(tasks))]
    return float(rows["successes"].sum() / rows["episodes"].sum())


# ---------------------------------------------------------
# NBT
# ---------------------------------------------------------
def compute_nbt(sr_matrix) -> float:
    """
    sr_matrix[i, j]: success rate on task j after learning phase i
    (T phases x T tasks). Forgetting of task i is SR just after learning it
    (diagonal) minus SR after the last phase, clipped at 0, averaged over
    the first T - 1 tasks.
    """
    sr = np.asarray(sr_matrix, dtype=float)
    if sr.ndim != 2 or sr.shape[0] != sr.shape[1]:
        raise DomainError(f"sr_matrix must be square (phases x tasks), got shape {sr.shape}")
    n = sr.shape[0]
    if n < 2:
        raise DomainError(f"NBT needs T >= 2 tasks, got {n}")
    drops = np.maximum(0.0, np.diag(sr)[:-1] - sr[-1, :-1])
    return float(drops.sum() / (n - 1))
