import numpy as np

from ml.environment import STATE_DIM
from ml.errors import DimensionError
from ml.flow import euler_sample
from ml.train_model import load_model


class Policy:
    """Chunked action sampler: Euler-integrates the learned field from fresh noise."""

    def __init__(self, model, euler_steps: int = 10):
        self.model = model
        self.euler_steps = euler_steps

    @classmethod
    def from_checkpoint(cls, path, euler_steps: int = 10) -> "Policy":
        model, _ = load_model(path)
        return cls(model, euler_steps=euler_steps)

    @property
    def horizon(self) -> int:
        return self.model.shape.horizon

    @property
    def action_dim(self) -> int:
        return self.model.shape.action_dim

    def check_env(self, env) -> None:
        if env.obs_dim != self.model.shape.obs_dim:
            raise DimensionError(
                f"checkpoint expects obs_dim {self.model.shape.obs_dim}, environment gives {env.obs_dim}"
            )
        if self.action_dim != STATE_DIM:
            raise DimensionError(f"checkpoint action_dim {self.action_dim} does not match the point mass ({STATE_DIM})")

    def sample_chunk(self, obs, rng: np.random.Generator) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        noise = rng.standard_normal((self.horizon, self.action_dim))
        return euler_sample(self.model, obs, noise, self.euler_steps)
