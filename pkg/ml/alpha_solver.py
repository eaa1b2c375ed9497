"""
Adaptive scaling factor alpha.

Batch moments of the advantages and per-sample FM losses feed the
bias-variance objective

    J(alpha) = sigma_L^2 * (exp(2 a^2 s_R^2) - exp(a^2 s_R^2)) - lambda * a * s_R^2

whose stationarity condition, with x = alpha^2 sigma_R^2, is the root of

    F(x) = 4 sqrt(x) e^{2x} - 2 sqrt(x) e^{x} - lambda * sigma_R / sigma_L^2.

F is strictly increasing on x > 0, so the root is found by bisection on a
bracket in x.
"""
import math
from dataclasses import dataclass, asdict

import numpy as np

from config.settings import build_section
from ml.errors import ConfigurationError, DomainError, NumericError

# exp() overflows float64 a little above 709
_MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class AlphaConfig:
    lam: float = 5.0e-4
    bisect_iters: int = 20
    alpha_min: float = 0.01
    alpha_max: float = 5.0
    tol: float = 1.0e-5

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lam}")
        if self.bisect_iters < 0:
            raise ConfigurationError(f"bisect_iters must be >= 0, got {self.bisect_iters}")
        # alpha_min == alpha_max pins alpha (alpha = 0 reproduces vanilla FM)
        if self.alpha_min < 0 or self.alpha_max < self.alpha_min:
            raise ConfigurationError(
                f"need 0 <= alpha_min <= alpha_max, got [{self.alpha_min}, {self.alpha_max}]"
            )
        if self.tol < 0:
            raise ConfigurationError(f"alpha_tol must be >= 0, got {self.tol}")

    @classmethod
    def from_section(cls, section: dict | None) -> "AlphaConfig":
        return build_section(cls, section, "alpha", renames={"lambda": "lam", "alpha_tol": "tol"})

    def to_section(self) -> dict:
        return {
            "lambda": self.lam, "bisect_iters": self.bisect_iters,
            "alpha_min": self.alpha_min, "alpha_max": self.alpha_max, "alpha_tol": self.tol,
        }


@dataclass(frozen=True)
class AlphaStats:
    sigma_r: float
    mu_l: float
    sigma_l: float

    @property
    def degenerate(self) -> bool:
        return self.sigma_r == 0.0 or self.sigma_l == 0.0


@dataclass(frozen=True)
class AlphaSolution:
    alpha: float
    x: float
    iterations: int
    residual: float
    clipped: bool
    degenerate: bool = False
    x_low: float = float("nan")
    x_high: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------
# Moments and closed forms
# ---------------------------------------------------------
def batch_stats(advantages, per_sample_losses) -> AlphaStats:
    r = np.asarray(advantages, dtype=float)
    losses = np.asarray(per_sample_losses, dtype=float)
    if r.shape != losses.shape or r.ndim != 1:
        raise DomainError(f"advantages {r.shape} and losses {losses.shape} must be equal-length vectors")
    if r.shape[0] < 2:
        raise DomainError(f"batch_stats needs B >= 2, got {r.shape[0]}")
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(losses))):
        raise NumericError("non-finite advantage or loss in batch")

    mu_l = float(losses.mean())
    return AlphaStats(
        sigma_r=float(np.sqrt(np.mean(r * r))),
        mu_l=mu_l,
        sigma_l=float(np.sqrt(np.mean((losses - mu_l) ** 2))),
    )


def objective_J(alpha: float, sigma_r: float, sigma_l: float, lam: float) -> float:
    if sigma_r < 0 or sigma_l < 0:
        raise DomainError("sigma_R and sigma_L must be non-negative")
    y = alpha * alpha * sigma_r * sigma_r
    if 2.0 * y > _MAX_EXPONENT:
        raise NumericError(f"objective_J overflow: exponent 2*alpha^2*sigma_R^2 = {2.0 * y:.3g}")
    # e^{2y} - e^{y} = e^{y} * expm1(y), exact near y = 0
    return sigma_l ** 2 * math.exp(y) * math.expm1(y) - lam * alpha * sigma_r ** 2


def residual_F(x: float, sigma_r: float, sigma_l: float, lam: float) -> float:
    if x < 0:
        raise DomainError(f"residual_F needs x >= 0, got {x}")
    if sigma_l <= 0:
        raise DomainError("residual_F is degenerate for sigma_L = 0")
    if 2.0 * x > _MAX_EXPONENT:
        # F is increasing, so past the exp range its sign is fixed
        return math.inf
    root_x = math.sqrt(x)
    return 4.0 * root_x * math.exp(2.0 * x) - 2.0 * root_x * math.exp(x) - lam * sigma_r / sigma_l ** 2


# ---------------------------------------------------------
# Bisection
# ---------------------------------------------------------
def solve_alpha(stats: AlphaStats, cfg: AlphaConfig) -> AlphaSolution:
    """
    Bisection on x in [sigma_R^2 alpha_min^2, sigma_R^2 alpha_max^2].

    Stops after `bisect_iters` halvings or once |F(x_mid)| < tol, and returns
    alpha = sqrt(midpoint of the final bracket) / sigma_R clamped to
    [alpha_min, alpha_max]. Without a sign change in the bracket the nearer
    endpoint is returned with clipped=True. Batches with sigma_R = 0 or
    sigma_L = 0 carry no signal to trade off and return alpha_min.
    """
    if stats.degenerate:
        return AlphaSolution(
            alpha=cfg.alpha_min, x=(cfg.alpha_min * stats.sigma_r) ** 2, iterations=0,
            residual=float("nan"), clipped=True, degenerate=True,
        )

    s2 = stats.sigma_r ** 2
    x_low, x_high = s2 * cfg.alpha_min ** 2, s2 * cfg.alpha_max ** 2

    def F(x):
        return residual_F(x, stats.sigma_r, stats.sigma_l, cfg.lam)

    if x_high == x_low:
        return AlphaSolution(
            alpha=cfg.alpha_min, x=x_low, iterations=0, residual=F(x_low),
            clipped=False, x_low=x_low, x_high=x_high,
        )

    # root outside the bracket: F increasing, so the sign at an end decides
    f_low = F(x_low)
    if f_low >= 0.0:
        return AlphaSolution(
            alpha=cfg.alpha_min, x=x_low, iterations=0, residual=f_low,
            clipped=f_low > 0.0, x_low=x_low, x_high=x_high,
        )
    f_high = F(x_high)
    if f_high <= 0.0:
        return AlphaSolution(
            alpha=cfg.alpha_max, x=x_high, iterations=0, residual=f_high,
            clipped=f_high < 0.0, x_low=x_low, x_high=x_high,
        )

    iterations = 0
    for _ in range(cfg.bisect_iters):
        x_mid = 0.5 * (x_low + x_high)
        f_mid = F(x_mid)
        iterations += 1
        if abs(f_mid) < cfg.tol:
            break
        if f_mid > 0.0:
            x_high = x_mid
        else:
            x_low = x_mid

    x_final = 0.5 * (x_low + x_high)
    alpha_raw = math.sqrt(x_final) / stats.sigma_r
    alpha = min(max(alpha_raw, cfg.alpha_min), cfg.alpha_max)
    return AlphaSolution(
        alpha=alpha, x=x_final, iterations=iterations, residual=F(x_final),
        clipped=alpha != alpha_raw, x_low=x_low, x_high=x_high,
    )


def resolve_alpha_trace(trace, cfg: AlphaConfig) -> np.ndarray:
    """
    Re-solve alpha for every recorded step of an alpha trace (columns
    sigma_r, sigma_l, mu_l) under `cfg`, e.g. a different bisection budget.
    """
    sigma_r = np.asarray(trace["sigma_r"], dtype=float)
    sigma_l = np.asarray(trace["sigma_l"], dtype=float)
    mu_l = np.asarray(trace["mu_l"], dtype=float) if "mu_l" in trace else np.zeros_like(sigma_r)
    return np.array([
        solve_alpha(AlphaStats(sigma_r=sr, mu_l=ml, sigma_l=sl), cfg).alpha
        for sr, sl, ml in zip(sigma_r, sigma_l, mu_l)
    ])
