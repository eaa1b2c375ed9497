"""
Conditional vs marginal energy-weighted flow matching on a discrete 1-D
support, energy E(x0) = -x0.

Noisy points follow x = tau x0 + (1 - tau) eps, so given x the posterior
over support points is p_j N(x; tau x0_j, (1 - tau)^2) normalised. The
intermediate energy and the marginal target are exact sums over the
support:

    exp(-E_t(x)) = sum_j post_j(x) exp(beta x0_j)
    u_hat_t(x)   = sum_j post_j(x) u(x | x0_j) exp(beta x0_j) / exp(-E_t(x))

with u(x | x0) = (x0 - x) / (1 - tau). Both gradient estimators are
evaluated on the same (x0, eps, tau) draws.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ml.errors import DomainError
from ml.model import ModelShape, VectorFieldModel


@dataclass
class EquivalenceReport:
    beta: float
    n_draws: int
    cosine: float
    norm_ratio: float
    cefm_norm: float
    efm_norm: float


@dataclass
class EnergyIdentityReport:
    beta: float
    n_draws: int
    empirical: float
    analytic: float
    standard_error: float


def _support(support, probs):
    x0 = np.asarray(support, dtype=float).ravel()
    p = np.full(x0.shape, 1.0 / x0.shape[0]) if probs is None else np.asarray(probs, dtype=float).ravel()
    if x0.shape != p.shape or x0.shape[0] < 1:
        raise DomainError(f"support {x0.shape} and probabilities {p.shape} must be equal-length and non-empty")
    if np.any(p < 0) or not np.isclose(p.sum(), 1.0):
        raise DomainError(f"support probabilities must be >= 0 and sum to 1, got {p}")
    return x0, p


def _draws(x0, p, n, rng):
    idx = rng.choice(x0.shape[0], size=n, p=p)
    eps = rng.standard_normal(n)
    # tau < 1 keeps the conditional field finite
    tau = rng.uniform(0.0, 1.0, size=n)
    tau = np.minimum(tau, 1.0 - 1e-9)
    return x0[idx], eps, tau


def _log_posterior(x, tau, x0, p):
    """log post_j(x) for every draw (rows) and support point (columns)."""
    sd = (1.0 - tau)[:, None]
    log_joint = np.log(np.where(p > 0, p, 1e-300))[None, :] - 0.5 * ((x[:, None] - tau[:, None] * x0[None, :]) / sd) ** 2
    return log_joint - logsumexp(log_joint, axis=1, keepdims=True)


def intermediate_energy(x, tau, x0, p, beta):
    """Returns (exp(-E_t(x)), u_hat_t(x))."""
    log_post = _log_posterior(x, tau, x0, p)
    log_tilt = log_post + beta * x0[None, :]
    log_z_t = logsumexp(log_tilt, axis=1)
    cond_field = (x0[None, :] - x[:, None]) / (1.0 - tau)[:, None]
    u_hat = np.sum(np.exp(log_tilt - log_z_t[:, None]) * cond_field, axis=1)
    return np.exp(log_z_t), u_hat


def gradient_equivalence_check(support=(-1.0, 0.0, 1.0), beta: float = 1.0, n_draws: int = 100_000,
                               seed: int = 0, probs=None, hidden: int = 8) -> EquivalenceReport:
    x0_support, p = _support(support, probs)
    rng = np.random.default_rng(seed)
    x0, eps, tau = _draws(x0_support, p, n_draws, rng)
    x = tau * x0 + (1.0 - tau) * eps

    model = VectorFieldModel(ModelShape(obs_dim=1, horizon=1, action_dim=1, hidden=hidden), seed=seed)
    obs = np.zeros((n_draws, 1))
    noisy = x.reshape(n_draws, 1, 1)
    log_z = logsumexp(beta * x0_support, b=p)

    # conditional: target x0 - eps weighted by exp(beta x0) / Z
    cefm_weights = np.exp(beta * x0 - log_z) / n_draws
    _, _, g_cefm = model.loss_and_gradient(obs, noisy, tau, (x0 - eps).reshape(-1, 1), cefm_weights)

    # marginal: target u_hat_t(x) weighted by exp(-E_t(x)) / Z
    z_t, u_hat = intermediate_energy(x, tau, x0_support, p, beta)
    efm_weights = z_t * np.exp(-log_z) / n_draws
    _, _, g_efm = model.loss_and_gradient(obs, noisy, tau, u_hat.reshape(-1, 1), efm_weights)

    n_cefm, n_efm = float(np.linalg.norm(g_cefm)), float(np.linalg.norm(g_efm))
    return EquivalenceReport(
        beta=beta, n_draws=n_draws,
        cosine=float(g_cefm @ g_efm / (n_cefm * n_efm)),
        norm_ratio=n_efm / n_cefm,
        cefm_norm=n_cefm, efm_norm=n_efm,
    )


def intermediate_energy_check(support=(-1.0, 0.0, 1.0), beta: float = 1.0, n_draws: int = 100_000,
                              seed: int = 0, probs=None) -> EnergyIdentityReport:
    """E_{x ~ p_t}[exp(-E_t(x))] against E_{x0 ~ p0}[exp(beta x0)], tau ~ Uniform(0, 1)."""
    x0_support, p = _support(support, probs)
    rng = np.random.default_rng(seed)
    x0, eps, tau = _draws(x0_support, p, n_draws, rng)
    x = tau * x0 + (1.0 - tau) * eps

    z_t, _ = intermediate_energy(x, tau, x0_support, p, beta)
    return EnergyIdentityReport(
        beta=beta, n_draws=n_draws,
        empirical=float(z_t.mean()),
        analytic=float(np.sum(p * np.exp(beta * x0_support))),
        standard_error=float(z_t.std() / np.sqrt(n_draws)),
    )
