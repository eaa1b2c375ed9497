"""
Optimizer pieces for the flat parameter vector: global-norm clipping,
cosine decay with linear warmup, and Adam with decoupled weight decay.
"""
import math

import numpy as np


def clip_by_global_norm(grad: np.ndarray, max_norm: float):
    """Returns (clipped_grad, pre_clip_norm, post_clip_norm)."""
    norm = float(np.sqrt(np.sum(grad * grad)))
    if max_norm is None or max_norm <= 0 or norm <= max_norm:
        return grad, norm, norm
    scale = max_norm / norm
    clipped = grad * scale
    return clipped, norm, float(np.sqrt(np.sum(clipped * clipped)))


def cosine_decay_with_warmup(step: int, warmup_steps: int, decay_steps: int,
                             peak_lr: float, decay_lr: float) -> float:
    """
    Linear warmup from peak/(warmup+1) to peak over `warmup_steps`, then a
    half-cosine from peak down to `decay_lr` reached at `decay_steps`
    (counted from step 0), constant afterwards.
    """
    if warmup_steps > 0 and step < warmup_steps:
        init_lr = peak_lr / (warmup_steps + 1)
        return init_lr + (peak_lr - init_lr) * step / warmup_steps
    span = max(decay_steps - warmup_steps, 1)
    progress = min(max(step - warmup_steps, 0) / span, 1.0)
    return decay_lr + (peak_lr - decay_lr) * 0.5 * (1.0 + math.cos(math.pi * progress))


class AdamW:
    def __init__(self, n_params: int, lr: float = 1e-4, betas=(0.9, 0.95),
                 eps: float = 1e-8, weight_decay: float = 1e-10):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float | None = None) -> None:
        """In-place update of `params`."""
        lr = self.lr if lr is None else lr
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        params -= lr * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * params)

    def state_dict(self) -> dict:
        return {"m": self.m.copy(), "v": self.v.copy(), "t": self.t}

    def load_state_dict(self, state: dict) -> None:
        self.m = np.array(state["m"], dtype=float)
        self.v = np.array(state["v"], dtype=float)
        self.t = int(state["t"])
