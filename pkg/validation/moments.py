"""
Monte-Carlo checks of the closed forms behind the alpha objective, with
R ~ N(0, sigma_R^2) and per-sample loss L ~ N(mu_L, sigma_L^2) drawn
independently:

    m1(alpha) = E[e^{alpha R}]   = exp(alpha^2 sigma_R^2 / 2)
    m2(alpha) = E[e^{2 alpha R}] = exp(2 alpha^2 sigma_R^2)
    S(alpha)  = E[e^{alpha R} R] / E[e^{alpha R}] = alpha sigma_R^2
    Var(e^{alpha R}) sigma_L^2 = sigma_L^2 (m2 - m1^2)         (weight term)
    Var(e^{alpha R} L) = m2 (sigma_L^2 + mu_L^2) - m1^2 mu_L^2  (full)
"""
from dataclasses import dataclass, field

import numpy as np


@dataclass
class MomentReport:
    alpha: float
    sigma_r: float
    n: int
    sigma_l: float = float("nan")
    mu_l: float = 0.0
    empirical: dict = field(default_factory=dict)
    analytic: dict = field(default_factory=dict)
    standard_error: dict = field(default_factory=dict)

    @property
    def relative_errors(self) -> dict:
        return {
            name: abs(self.empirical[name] - self.analytic[name]) / abs(self.analytic[name])
            if self.analytic[name] != 0 else abs(self.empirical[name])
            for name in self.empirical
        }


def analytic_m1(alpha: float, sigma_r: float) -> float:
    return float(np.exp(0.5 * alpha ** 2 * sigma_r ** 2))


def analytic_m2(alpha: float, sigma_r: float) -> float:
    return float(np.exp(2.0 * alpha ** 2 * sigma_r ** 2))


def analytic_weight_variance(alpha: float, sigma_r: float, sigma_l: float) -> float:
    y = alpha ** 2 * sigma_r ** 2
    return float(sigma_l ** 2 * np.exp(y) * np.expm1(y))


def _sample_variance_se(values: np.ndarray) -> float:
    """Large-sample SE of the population variance: sqrt((mu_4 - s^4) / n)."""
    centred = values - values.mean()
    s2 = np.mean(centred ** 2)
    mu4 = np.mean(centred ** 4)
    return float(np.sqrt(max(mu4 - s2 ** 2, 0.0) / values.shape[0]))


def mc_moments(alpha: float, sigma_r: float, n: int = 1_000_000, seed: int = 0) -> MomentReport:
    rng = np.random.default_rng(seed)
    r = sigma_r * rng.standard_normal(n)
    w1 = np.exp(alpha * r)
    w2 = np.exp(2.0 * alpha * r)
    return MomentReport(
        alpha=alpha, sigma_r=sigma_r, n=n,
        empirical={"m1": float(w1.mean()), "m2": float(w2.mean())},
        analytic={"m1": analytic_m1(alpha, sigma_r), "m2": analytic_m2(alpha, sigma_r)},
        standard_error={"m1": float(w1.std() / np.sqrt(n)), "m2": float(w2.std() / np.sqrt(n))},
    )


def mc_score_and_variance(alpha: float, sigma_r: float, sigma_l: float, n: int = 1_000_000,
                          seed: int = 0, mu_l: float = 0.0) -> MomentReport:
    rng = np.random.default_rng(seed)
    r = sigma_r * rng.standard_normal(n)
    losses = mu_l + sigma_l * rng.standard_normal(n)
    w = np.exp(alpha * r)

    score = float(np.sum(w * r) / np.sum(w))
    # delta method for a ratio of means
    score_se = float(np.sqrt(np.mean((w * (r - score)) ** 2)) / (w.mean() * np.sqrt(n)))

    weighted_loss = w * losses
    m1, m2 = analytic_m1(alpha, sigma_r), analytic_m2(alpha, sigma_r)
    return MomentReport(
        alpha=alpha, sigma_r=sigma_r, n=n, sigma_l=sigma_l, mu_l=mu_l,
        empirical={
            "score": score,
            "full_variance": float(weighted_loss.var()),
            "weight_variance": float(w.var() * sigma_l ** 2),
        },
        analytic={
            "score": alpha * sigma_r ** 2,
            "full_variance": m2 * (sigma_l ** 2 + mu_l ** 2) - m1 ** 2 * mu_l ** 2,
            "weight_variance": analytic_weight_variance(alpha, sigma_r, sigma_l),
        },
        standard_error={
            "score": score_se,
            "full_variance": _sample_variance_se(weighted_loss),
            "weight_variance": _sample_variance_se(w) * sigma_l ** 2,
        },
    )
