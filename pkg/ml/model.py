"""
Tiny conditional vector-field network v_theta(A_tau, o, tau).

Two dense layers with a smooth nonlinearity between them, parameters held in
one flat vector with a gradient accumulator of the same shape. Gradients are
computed by hand in reverse mode (forward pass caches its intermediates, the
backward pass walks them in reverse).
"""
from dataclasses import dataclass, asdict

import numpy as np

from ml.errors import ConfigurationError, DimensionError, NumericError
from ml.flow import per_sample_fm_loss

ACTIVATIONS = ("tanh", "identity")


@dataclass(frozen=True)
class ModelShape:
    obs_dim: int
    horizon: int
    action_dim: int
    hidden: int = 64
    activation: str = "tanh"

    @property
    def chunk_size(self) -> int:
        return self.horizon * self.action_dim

    @property
    def input_dim(self) -> int:
        # obs ++ flattened A_tau ++ (tau, sin 2 pi tau, cos 2 pi tau)
        return self.obs_dim + self.chunk_size + 3

    @property
    def output_dim(self) -> int:
        return self.chunk_size

    @property
    def n_params(self) -> int:
        return (
            self.input_dim * self.hidden
            + self.hidden
            + self.hidden * self.output_dim
            + self.output_dim
        )

    def to_dict(self) -> dict:
        return asdict(self)


def tau_embedding(tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float).reshape(-1)
    angle = 2.0 * np.pi * tau
    return np.stack([tau, np.sin(angle), np.cos(angle)], axis=1)


def _require_finite(array: np.ndarray, layer: str):
    if not np.all(np.isfinite(array)):
        raise NumericError(f"non-finite values in layer '{layer}'", layer=layer)


class VectorFieldModel:
    def __init__(self, shape: ModelShape, params: np.ndarray | None = None, seed: int = 0):
        if shape.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation '{shape.activation}', expected one of {ACTIVATIONS}")
        self.shape = shape

        if params is None:
            params = self._init_params(np.random.default_rng(seed))
        params = np.array(params, dtype=float)
        if params.shape != (shape.n_params,):
            raise DimensionError(
                f"parameter vector has shape {params.shape}, expected ({shape.n_params},)"
            )
        self.params = params
        self.grad = np.zeros_like(self.params)

    # -----------------------------------------------------
    # Parameter layout
    # -----------------------------------------------------
    def _init_params(self, rng: np.random.Generator) -> np.ndarray:
        s = self.shape
        w1 = rng.standard_normal((s.input_dim, s.hidden)) / np.sqrt(s.input_dim)
        w2 = rng.standard_normal((s.hidden, s.output_dim)) / np.sqrt(s.hidden)
        return np.concatenate([
            w1.ravel(), np.zeros(s.hidden), w2.ravel(), np.zeros(s.output_dim),
        ])

    def _split(self, flat: np.ndarray):
        """Reshaped views (W1, b1, W2, b2) into a flat vector laid out like `params`."""
        s = self.shape
        i = 0
        w1 = flat[i:i + s.input_dim * s.hidden].reshape(s.input_dim, s.hidden)
        i += s.input_dim * s.hidden
        b1 = flat[i:i + s.hidden]
        i += s.hidden
        w2 = flat[i:i + s.hidden * s.output_dim].reshape(s.hidden, s.output_dim)
        i += s.hidden * s.output_dim
        b2 = flat[i:i + s.output_dim]
        return w1, b1, w2, b2

    def copy(self) -> "VectorFieldModel":
        return VectorFieldModel(self.shape, params=self.params.copy())

    # -----------------------------------------------------
    # Forward / backward
    # -----------------------------------------------------
    def features(self, obs, noisy, tau) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        noisy = np.asarray(noisy, dtype=float)
        n = noisy.shape[0]
        if obs.ndim == 1:
            obs = np.broadcast_to(obs, (n, obs.shape[0]))
        if obs.shape != (n, self.shape.obs_dim):
            raise DimensionError(
                f"observations have shape {obs.shape}, expected ({n}, {self.shape.obs_dim})"
            )
        flat_chunk = noisy.reshape(n, -1)
        if flat_chunk.shape[1] != self.shape.chunk_size:
            raise DimensionError(
                f"action chunk has {flat_chunk.shape[1]} entries, expected {self.shape.chunk_size}"
            )
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (n,))
        return np.concatenate([obs, flat_chunk, tau_embedding(tau)], axis=1)

    def _forward(self, x: np.ndarray):
        w1, b1, w2, b2 = self._split(self.params)
        z1 = x @ w1 + b1
        _require_finite(z1, "dense_1")
        h = np.tanh(z1) if self.shape.activation == "tanh" else z1
        y = h @ w2 + b2
        _require_finite(y, "dense_2")
        return y, (x, h)

    def _backward(self, cache, dy: np.ndarray) -> np.ndarray:
        x, h = cache
        _, _, w2, _ = self._split(self.params)
        grad = np.zeros_like(self.params)
        dw1, db1, dw2, db2 = self._split(grad)

        dw2[...] = h.T @ dy
        db2[...] = dy.sum(axis=0)
        dh = dy @ w2.T
        dz1 = dh * (1.0 - h * h) if self.shape.activation == "tanh" else dh
        _require_finite(dz1, "dense_1")
        dw1[...] = x.T @ dz1
        db1[...] = dz1.sum(axis=0)
        _require_finite(grad, "dense_1")
        return grad

    def predict(self, obs, noisy, tau) -> np.ndarray:
        noisy = np.asarray(noisy, dtype=float)
        y, _ = self._forward(self.features(obs, noisy, tau))
        return y.reshape(noisy.shape)

    def per_sample_losses(self, obs, noisy, tau, target) -> np.ndarray:
        return per_sample_fm_loss(self.predict(obs, noisy, tau), target)

    def loss_and_gradient(self, obs, noisy, tau, target, weights):
        """
        Weighted FM loss sum_i w_i * ||v_i - u_i||^2 and its exact gradient.

        Weights are constants here: nothing flows back through them.
        Returns (weighted_loss, per_sample_losses, grad); `self.grad` is
        overwritten with the gradient.
        """
        noisy = np.asarray(noisy, dtype=float)
        target = np.asarray(target, dtype=float).reshape(noisy.shape[0], -1)
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (noisy.shape[0],):
            raise DimensionError(
                f"{weights.shape[0] if weights.ndim else 0} weights for a batch of {noisy.shape[0]}"
            )

        y, cache = self._forward(self.features(obs, noisy, tau))
        residual = y - target
        losses = np.sum(residual * residual, axis=1)
        dy = 2.0 * weights[:, None] * residual
        grad = self._backward(cache, dy)

        self.grad[...] = grad
        return float(weights @ losses), losses, grad


def model_gradient(model: VectorFieldModel, batch: dict, weights) -> np.ndarray:
    """
    Gradient of sum_i w_i L_FM^i for a batch dict with keys
    obs, noisy, tau, target.
    """
    _, _, grad = model.loss_and_gradient(
        batch["obs"], batch["noisy"], batch["tau"], batch["target"], weights
    )
    return grad
