"""
Exponential-tilt oracles on a 1-D Gaussian.

With p0 = N(m, s^2) and energy E(x) = -x, the energy-guided law
q0 ∝ p0 exp(-beta E) is N(m + beta s^2, s^2). Training a flow whose batch
weights are softmax(beta * x) over draws from p0 should therefore sample
that shifted Gaussian.
"""
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from ml.alpha_solver import AlphaConfig
from ml.errors import DomainError
from ml.flow import euler_sample
from ml.model import ModelShape, VectorFieldModel
from ml.train_model import TrainConfig, train
from ml.weighting import baseline_mode


@dataclass(frozen=True)
class TiltSpec:
    base_mean: float = 0.0
    base_var: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.base_var <= 0:
            raise DomainError(f"base variance must be positive, got {self.base_var}")
        if self.beta < 0:
            raise DomainError(f"tilt strength must be >= 0, got {self.beta}")

    @property
    def tilted_mean(self) -> float:
        return self.base_mean + self.beta * self.base_var

    @property
    def tilted_std(self) -> float:
        return float(np.sqrt(self.base_var))

    def log_normalizer(self) -> float:
        """log E_{p0}[exp(beta x)]."""
        return self.beta * self.base_mean + 0.5 * self.beta ** 2 * self.base_var


@dataclass
class TiltReport:
    beta: float
    n_samples: int
    ks_statistic: float
    p_value: float
    ks_to_base: float
    sample_mean: float
    sample_std: float
    final_loss: float


def tilt_identity_check(spec: TiltSpec) -> dict:
    """Quadrature of p0(x) exp(beta x) / Z: total mass and mean."""
    base = stats.norm(spec.base_mean, np.sqrt(spec.base_var))
    log_z = spec.log_normalizer()

    def density(x):
        return np.exp(base.logpdf(x) + spec.beta * x - log_z)

    lo = spec.tilted_mean - 12.0 * spec.tilted_std
    hi = spec.tilted_mean + 12.0 * spec.tilted_std
    mass, _ = integrate.quad(density, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
    first, _ = integrate.quad(lambda x: x * density(x), lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
    return {
        "mass": mass,
        "mean": first / mass,
        "analytic_mean": spec.tilted_mean,
    }


def _gaussian_batches(spec: TiltSpec, batch_size: int, seed: int):
    rng = np.random.default_rng(seed)
    obs = np.zeros((batch_size, 1))
    while True:
        x = spec.base_mean + np.sqrt(spec.base_var) * rng.standard_normal(batch_size)
        # R*(x) = x, so softmax(beta * R*) realises exp(-beta E) with E(x) = -x
        yield {"obs": obs, "clean": x.reshape(batch_size, 1, 1), "advantages": x}


def train_tilted_flow(spec: TiltSpec, train_steps: int = 3000, batch_size: int = 256,
                      hidden: int = 64, seed: int = 0, verbose: bool = False):
    shape = ModelShape(obs_dim=1, horizon=1, action_dim=1, hidden=hidden)
    model = VectorFieldModel(shape, seed=seed)
    cfg = TrainConfig(
        total_steps=train_steps, batch_size=batch_size, horizon=1, hidden=hidden,
        warmup_steps=min(100, train_steps // 10), decay_steps=train_steps,
        peak_lr=3.0e-3, decay_lr=1.0e-4, log_every=0, seed=seed,
    )
    reports = train(model, _gaussian_batches(spec, batch_size, seed), cfg, AlphaConfig(),
                    baseline_mode("fixed_alpha", spec.beta), verbose=verbose)
    return model, reports


def tilt_sampling_check(spec: TiltSpec, n_samples: int = 10_000, train_steps: int = 3000,
                        batch_size: int = 256, euler_steps: int = 50, seed: int = 0,
                        verbose: bool = False) -> TiltReport:
    model, reports = train_tilted_flow(spec, train_steps, batch_size, seed=seed, verbose=verbose)

    rng = np.random.default_rng([seed, 7])
    noise = rng.standard_normal((n_samples, 1, 1))
    samples = euler_sample(model, np.zeros((n_samples, 1)), noise, euler_steps).ravel()

    target = stats.kstest(samples, stats.norm(spec.tilted_mean, spec.tilted_std).cdf)
    base = stats.kstest(samples, stats.norm(spec.base_mean, np.sqrt(spec.base_var)).cdf)
    return TiltReport(
        beta=spec.beta, n_samples=n_samples,
        ks_statistic=float(target.statistic), p_value=float(target.pvalue),
        ks_to_base=float(base.statistic),
        sample_mean=float(samples.mean()), sample_std=float(samples.std()),
        final_loss=float(np.mean([r.mean_fm_loss for r in reports[-100:]])),
    )
