"""
2-D point-mass reaching environment shared by dataset generation and
policy evaluation.

State q is a planar position; an action is a commanded velocity, so one
step moves q by dt * (action + execution noise). Task k asks the mass to
reach a goal on a circle at angle 2*pi*k / num_tasks.

Observation = 9 radial-basis "image" channels (3x3 anchors on [-1, 1]^2)
++ position q ++ task one-hot.
"""
import numpy as np

from ml.errors import DimensionError, DomainError

IMAGE_ANCHORS = np.array([(x, y) for y in (-1.0, 0.0, 1.0) for x in (-1.0, 0.0, 1.0)])
IMAGE_WIDTH = 0.5
N_IMAGE = IMAGE_ANCHORS.shape[0]
STATE_DIM = 2


def min_jerk(u):
    u = np.clip(u, 0.0, 1.0)
    return 10.0 * u ** 3 - 15.0 * u ** 4 + 6.0 * u ** 5


class PointMassEnv:
    def __init__(self, num_tasks: int, episode_length: int = 32, dt: float = 0.1,
                 goal_radius: float = 1.0, start_jitter: float = 0.2, goal_threshold: float = 0.05,
                 num_subgoals: int = 4, subgoal_radius: float = 0.1):
        if num_tasks < 1:
            raise DomainError(f"num_tasks must be >= 1, got {num_tasks}")
        if episode_length < 1:
            raise DomainError(f"episode_length must be >= 1, got {episode_length}")
        self.num_tasks = num_tasks
        self.episode_length = episode_length
        self.dt = dt
        self.goal_radius = goal_radius
        self.start_jitter = start_jitter
        self.goal_threshold = goal_threshold
        self.num_subgoals = num_subgoals
        self.subgoal_radius = subgoal_radius

        self.task_id = 0
        self.t = 0
        self.q = np.zeros(STATE_DIM)

    @classmethod
    def from_manifest(cls, manifest) -> "PointMassEnv":
        return cls(
            num_tasks=manifest.num_tasks, episode_length=manifest.episode_length, dt=manifest.dt,
            goal_radius=manifest.goal_radius, start_jitter=manifest.start_jitter,
            goal_threshold=manifest.goal_threshold, num_subgoals=manifest.num_subgoals,
            subgoal_radius=manifest.subgoal_radius,
        )

    @property
    def obs_dim(self) -> int:
        return N_IMAGE + STATE_DIM + self.num_tasks

    # -----------------------------------------------------
    # Geometry
    # -----------------------------------------------------
    def goal(self, task_id: int) -> np.ndarray:
        if not 0 <= task_id < self.num_tasks:
            raise DomainError(f"task_id {task_id} outside [0, {self.num_tasks})")
        angle = 2.0 * np.pi * task_id / self.num_tasks
        return self.goal_radius * np.array([np.cos(angle), np.sin(angle)])

    def goal_distance(self, q, task_id: int) -> float:
        return float(np.linalg.norm(np.asarray(q, dtype=float) - self.goal(task_id)))

    def subgoals(self, start, task_id: int) -> np.ndarray:
        """Waypoints at equal arc-length fractions of the straight start-goal path; the last is the goal."""
        start = np.asarray(start, dtype=float)
        fractions = np.arange(1, self.num_subgoals + 1) / self.num_subgoals
        return start + fractions[:, None] * (self.goal(task_id) - start)

    def reference_position(self, start, task_id: int, t: int) -> np.ndarray:
        start = np.asarray(start, dtype=float)
        return start + (self.goal(task_id) - start) * min_jerk(t / self.episode_length)

    def expert_action(self, q, start, task_id: int, t: int) -> np.ndarray:
        """Velocity that lands exactly on the minimum-jerk reference at t + 1."""
        return (self.reference_position(start, task_id, t + 1) - np.asarray(q, dtype=float)) / self.dt

    # -----------------------------------------------------
    # Observations
    # -----------------------------------------------------
    def image_features(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        sq_dist = np.sum((IMAGE_ANCHORS - q) ** 2, axis=1)
        return np.exp(-sq_dist / (2.0 * IMAGE_WIDTH ** 2))

    def observe(self, q, task_id: int) -> np.ndarray:
        one_hot = np.zeros(self.num_tasks)
        one_hot[task_id] = 1.0
        return np.concatenate([self.image_features(q), np.asarray(q, dtype=float), one_hot])

    # -----------------------------------------------------
    # Episode API
    # -----------------------------------------------------
    def reset(self, task_id: int, rng: np.random.Generator, start=None) -> np.ndarray:
        self.goal(task_id)
        self.task_id = task_id
        self.t = 0
        if start is None:
            start = rng.uniform(-self.start_jitter, self.start_jitter, size=STATE_DIM)
        self.start = np.array(start, dtype=float)
        self.q = self.start.copy()
        return self.observe(self.q, task_id)

    def step(self, action, noise=None):
        """Returns (observation, done). `noise` is added to the commanded velocity."""
        action = np.asarray(action, dtype=float)
        if action.shape != (STATE_DIM,):
            raise DimensionError(f"action has shape {action.shape}, expected ({STATE_DIM},)")
        velocity = action if noise is None else action + np.asarray(noise, dtype=float)
        self.q = self.q + self.dt * velocity
        self.t += 1
        return self.observe(self.q, self.task_id), self.t >= self.episode_length

    def success(self, q=None, task_id=None) -> bool:
        q = self.q if q is None else q
        task_id = self.task_id if task_id is None else task_id
        return self.goal_distance(q, task_id) < self.goal_threshold
