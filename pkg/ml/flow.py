"""
Conditional flow-matching primitives on the optimal-transport path.

Conventions:
- tau = 0 is pure noise, tau = 1 is data
- noisy = tau * clean + (1 - tau) * noise
- target = clean - noise, the tau-derivative of the path, so forward Euler
  integration of the field transports noise to data
"""
import numpy as np

from ml.errors import DimensionError, DomainError, NumericError


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str):
    if a.shape != b.shape:
        raise DimensionError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------
# Path and target
# ---------------------------------------------------------
def noisy_chunk(clean, noise, tau) -> np.ndarray:
    """
    Point on the linear noise path.

    `tau` is a scalar, or an array of per-sample times whose length matches
    the leading axis of `clean` (batched use).
    """
    clean = np.asarray(clean, dtype=float)
    noise = np.asarray(noise, dtype=float)
    _check_same_shape(clean, noise, "noisy_chunk")

    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0.0) or np.any(tau > 1.0) or not np.all(np.isfinite(tau)):
        raise DomainError(f"tau must lie in [0, 1], got {tau}")

    if tau.ndim == 1:
        if tau.shape[0] != clean.shape[0]:
            raise DimensionError(
                f"noisy_chunk: {tau.shape[0]} times for a batch of {clean.shape[0]}"
            )
        tau = tau.reshape((-1,) + (1,) * (clean.ndim - 1))
    elif tau.ndim > 1:
        raise DimensionError(f"noisy_chunk: tau must be scalar or 1-D, got shape {tau.shape}")

    return tau * clean + (1.0 - tau) * noise


def conditional_target(clean, noise) -> np.ndarray:
    clean = np.asarray(clean, dtype=float)
    noise = np.asarray(noise, dtype=float)
    _check_same_shape(clean, noise, "conditional_target")
    return clean - noise


def fm_loss(prediction, target) -> float:
    """Squared Euclidean norm of the residual, summed over every entry."""
    prediction = np.asarray(prediction, dtype=float)
    target = np.asarray(target, dtype=float)
    _check_same_shape(prediction, target, "fm_loss")
    residual = prediction - target
    return float(np.sum(residual * residual))


def per_sample_fm_loss(prediction, target) -> np.ndarray:
    """fm_loss for each row of a batch (sum over every non-batch axis)."""
    prediction = np.asarray(prediction, dtype=float)
    target = np.asarray(target, dtype=float)
    _check_same_shape(prediction, target, "per_sample_fm_loss")
    residual = (prediction - target).reshape(prediction.shape[0], -1)
    return np.sum(residual * residual, axis=1)


def sample_flow_batch(clean, rng: np.random.Generator):
    """
    Draw eps ~ N(0, I) and tau ~ Uniform(0, 1) for each chunk of a batch.

    Returns (noise, tau, noisy, target).
    """
    clean = np.asarray(clean, dtype=float)
    noise = rng.standard_normal(clean.shape)
    tau = rng.uniform(0.0, 1.0, size=clean.shape[0])
    return noise, tau, noisy_chunk(clean, noise, tau), conditional_target(clean, noise)


def chunk_from_actions(actions, t: int, horizon: int) -> np.ndarray:
    actions = np.asarray(actions, dtype=float)
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    if t < 0 or t > actions.shape[0] - horizon:
        raise DomainError(
            f"chunk start {t} out of range for {actions.shape[0]} actions and H={horizon}"
        )
    return actions[t:t + horizon].copy()


# ---------------------------------------------------------
# Sampling
# ---------------------------------------------------------
def euler_sample(model, obs, init_noise, steps: int) -> np.ndarray:
    """
    Integrate the learned field from tau = 0 to tau = 1 with forward Euler.

    `model.predict(obs, noisy, tau)` takes a batch. A single observation /
    noise chunk is promoted to a batch of one and squeezed back.
    """
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")

    chunk = np.array(init_noise, dtype=float)
    obs = np.asarray(obs, dtype=float)
    single = chunk.ndim == 2
    if single:
        chunk = chunk[None]
        obs = obs.reshape(1, -1)
    if obs.shape[0] != chunk.shape[0]:
        raise DimensionError(
            f"euler_sample: {obs.shape[0]} observations for {chunk.shape[0]} noise chunks"
        )

    delta = 1.0 / steps
    for k in range(steps):
        tau = np.full(chunk.shape[0], k * delta)
        velocity = np.asarray(model.predict(obs, chunk, tau), dtype=float)
        if velocity.shape != chunk.shape:
            raise DimensionError(
                f"euler_sample: model returned {velocity.shape}, expected {chunk.shape}"
            )
        if not np.all(np.isfinite(velocity)):
            raise NumericError(f"non-finite vector field at Euler step {k}", step=k)
        chunk = chunk + delta * velocity

    return chunk[0] if single else chunk
