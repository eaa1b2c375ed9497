import numpy as np

from ml.errors import DomainError
from ml.model import model_gradient


def _weighted_loss(model, batch, weights) -> float:
    losses = model.per_sample_losses(batch["obs"], batch["noisy"], batch["tau"], batch["target"])
    return float(np.asarray(weights, dtype=float) @ losses)


def finite_diff_check(model, batch: dict, weights, coordinates, h: float = 1e-5,
                      floor: float = 1e-12) -> float:
    """
    Max relative error |numeric - g_i| / max(|numeric|, |g_i|, floor) between
    central differences of sum_i w_i L_i and the reverse-mode gradient over
    the given parameter coordinates. `floor` only guards against 0 / 0, so
    small gradients are judged on the same relative scale as large ones.
    Parameters are restored afterwards.
    """
    if not 1e-7 <= h <= 1e-3:
        raise DomainError(f"step h must lie in [1e-7, 1e-3], got {h}")

    analytic = model_gradient(model, batch, weights).copy()
    worst = 0.0
    for i in np.asarray(coordinates, dtype=int):
        original = model.params[i]
        model.params[i] = original + h
        upper = _weighted_loss(model, batch, weights)
        model.params[i] = original - h
        lower = _weighted_loss(model, batch, weights)
        model.params[i] = original

        numeric = (upper - lower) / (2.0 * h)
        scale = max(abs(numeric), abs(analytic[i]), floor)
        worst = max(worst, abs(numeric - analytic[i]) / scale)
    return worst


def random_check_batch(model, batch_size: int, rng: np.random.Generator) -> dict:
    """Random observations, noisy chunks, times and targets shaped for `model`."""
    s = model.shape
    return {
        "obs": rng.standard_normal((batch_size, s.obs_dim)),
        "noisy": rng.standard_normal((batch_size, s.horizon, s.action_dim)),
        "tau": rng.uniform(0.0, 1.0, size=batch_size),
        "target": rng.standard_normal((batch_size, s.horizon, s.action_dim)),
    }
