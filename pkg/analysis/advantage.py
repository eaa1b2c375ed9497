"""
Return-to-go and critic-free advantages: leave-one-out baselines and
per-task z-scoring.
"""
from dataclasses import dataclass

import numpy as np
from sklearn.preprocessing import StandardScaler

from ml.errors import ConfigurationError, DimensionError, DomainError

SOURCES = ("standardized", "loo")


@dataclass
class AdvantageBatch:
    task_ids: np.ndarray
    returns: np.ndarray
    advantages: np.ndarray


def return_to_go(step_rewards) -> np.ndarray:
    rewards = np.asarray(step_rewards, dtype=float)
    if rewards.ndim != 1 or rewards.shape[0] == 0:
        raise DomainError("return_to_go needs a non-empty reward sequence")
    return np.cumsum(rewards[::-1])[::-1]


# ---------------------------------------------------------
# Leave-one-out
# ---------------------------------------------------------
def loo_advantages(returns) -> np.ndarray:
    """(K / (K - 1)) * (R_k - mean(R)) for every k: R_k minus the mean of the other K - 1."""
    r = np.asarray(returns, dtype=float)
    k = r.shape[0]
    if k < 2:
        raise DomainError(f"leave-one-out needs K >= 2 samples, got {k}")
    return (k / (k - 1)) * (r - r.mean())


def loo_advantage(returns, k: int) -> float:
    r = np.asarray(returns, dtype=float)
    if r.shape[0] >= 2 and not 0 <= k < r.shape[0]:
        raise DomainError(f"index {k} outside [0, {r.shape[0]})")
    return float(loo_advantages(r)[k])


def _check_grouping(returns, task_ids):
    r = np.asarray(returns, dtype=float)
    ids = np.asarray(task_ids)
    if r.shape != ids.shape or r.ndim != 1:
        raise DimensionError(f"returns {r.shape} and task ids {ids.shape} must be equal-length vectors")
    return r, ids


def loo_per_task(returns, task_ids) -> np.ndarray:
    r, ids = _check_grouping(returns, task_ids)
    out = np.zeros_like(r)
    for task in np.unique(ids):
        mask = ids == task
        if mask.sum() >= 2:
            out[mask] = loo_advantages(r[mask])
    return out


# ---------------------------------------------------------
# Standardisation
# ---------------------------------------------------------
def standardize_per_task(returns, task_ids) -> AdvantageBatch:
    r, ids = _check_grouping(returns, task_ids)
    advantages = np.zeros_like(r)
    for task in np.unique(ids):
        mask = ids == task
        group = r[mask]
        # singleton and constant groups carry no signal: R* = 0
        if group.shape[0] < 2 or np.ptp(group) == 0:
            continue
        advantages[mask] = StandardScaler().fit_transform(group.reshape(-1, 1)).ravel()
    return AdvantageBatch(task_ids=ids.copy(), returns=r.copy(), advantages=advantages)


def scale_to_unit_rms(advantages) -> np.ndarray:
    """Divide by the pooled RMS; an all-zero vector is returned unchanged."""
    a = np.asarray(advantages, dtype=float)
    rms = float(np.sqrt(np.mean(a * a))) if a.size else 0.0
    return a / rms if rms > 0.0 else a.copy()


def advantages_for(returns, task_ids, source: str = "standardized") -> np.ndarray:
    """
    R* for every sample. `standardized` z-scores each task group; `loo`
    takes per-task leave-one-out advantages rescaled by their pooled RMS, so
    R* lives on the unit scale the alpha bracket assumes while the relative
    spread between tasks survives.
    """
    if source == "standardized":
        return standardize_per_task(returns, task_ids).advantages
    if source == "loo":
        return scale_to_unit_rms(loo_per_task(returns, task_ids))
    raise ConfigurationError(f"unknown advantage source '{source}', expected one of {SOURCES}")
