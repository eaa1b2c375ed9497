"""
Energy weights w_i(alpha) = softmax(alpha * R*) and the weighting rule of
each training mode.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from ml.errors import ConfigurationError, DimensionError, NumericError

MODES = ("arfm", "vanilla_fm", "fixed_alpha", "rwr")


def _advantage_vector(advantages) -> np.ndarray:
    r = np.asarray(advantages, dtype=float)
    if r.ndim != 1 or r.shape[0] < 1:
        raise DimensionError(f"advantages must be a non-empty vector, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise NumericError("non-finite advantage in batch")
    return r


def energy_weights(advantages, alpha: float) -> np.ndarray:
    r = _advantage_vector(advantages)
    if not np.isfinite(alpha):
        raise NumericError(f"non-finite alpha {alpha}")
    # scipy's softmax subtracts the max before exponentiating
    return softmax(alpha * r)


def rwr_weights(advantages) -> np.ndarray:
    """Reward-weighted regression: exp(R*) normalised over the batch."""
    r = _advantage_vector(advantages)
    unnormalized = np.exp(r - r.max())
    return unnormalized / unnormalized.sum()


def weighted_loss(per_sample_losses, weights) -> float:
    losses = np.asarray(per_sample_losses, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if losses.shape != weights.shape:
        raise DimensionError(f"{losses.shape[0]} losses for {weights.shape[0]} weights")
    return float(weights @ losses)


def empirical_score_S(advantages, alpha: float) -> float:
    """Self-normalised tilted mean sum_i w_i R*_i."""
    r = _advantage_vector(advantages)
    return float(energy_weights(r, alpha) @ r)


def weight_entropy(weights) -> float:
    w = np.asarray(weights, dtype=float)
    positive = w[w > 0]
    return float(-np.sum(positive * np.log(positive)))


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


# ---------------------------------------------------------
# Training modes
# ---------------------------------------------------------
@dataclass(frozen=True)
class TrainingMode:
    name: str = "arfm"
    alpha0: float = 0.0

    @property
    def adaptive(self) -> bool:
        return self.name == "arfm"

    @property
    def fixed_alpha(self) -> float | None:
        """Constant alpha of a non-adaptive mode; None when alpha is solved per step."""
        if self.name == "vanilla_fm":
            return 0.0
        if self.name == "fixed_alpha":
            return float(self.alpha0)
        if self.name == "rwr":
            return 1.0
        return None

    def weights(self, advantages, alpha: float) -> np.ndarray:
        if self.name == "rwr":
            return rwr_weights(advantages)
        return energy_weights(advantages, alpha)


def baseline_mode(name: str, alpha0: float = 0.0) -> TrainingMode:
    if name not in MODES:
        raise ConfigurationError(f"unknown mode '{name}', expected one of {MODES}")
    if name == "fixed_alpha" and not np.isfinite(alpha0):
        raise ConfigurationError(f"fixed_alpha needs a finite alpha0, got {alpha0}")
    return TrainingMode(name=name, alpha0=float(alpha0))
