"""
Registry of named numerical checks and the runner behind `validate`.

Every check yields one row: empirical value, analytic value, tolerance and
standard error. A row passes when |empirical - analytic| <= max(tolerance,
se_multiplier * standard_error) and any extra condition of the check holds.
"""
from dataclasses import dataclass, asdict, field, replace

import numpy as np
import pandas as pd

from analysis.evaluate import compute_nbt
from config.settings import build_section
from ml.alpha_solver import AlphaConfig, AlphaStats, objective_J, residual_F, solve_alpha
from ml.build_dataset import DatasetManifest, generate, make_batches
from ml.errors import ConfigurationError, NumericError
from ml.model import ModelShape, VectorFieldModel
from ml.train_model import TrainConfig, train
from ml.weighting import baseline_mode, energy_weights
from validation.equivalence import gradient_equivalence_check, intermediate_energy_check
from validation.gradcheck import finite_diff_check, random_check_batch
from validation.moments import mc_moments, mc_score_and_variance
from validation.tilt import TiltSpec, tilt_identity_check, tilt_sampling_check


@dataclass(frozen=True)
class ValidateConfig:
    checks: tuple = ()
    tolerance_override: dict = field(default_factory=dict)
    se_multiplier: float = 3.0
    mc_samples: int = 1_000_000
    equivalence_draws: int = 100_000
    tilt_samples: int = 10_000
    tilt_train_steps: int = 3000
    tilt_batch_size: int = 256
    degeneration_steps: int = 500
    seed: int = 0

    @classmethod
    def from_section(cls, section: dict | None, seed: int = 0) -> "ValidateConfig":
        cfg = build_section(cls, section, "validate")
        return replace(cfg, seed=int(seed), tolerance_override=dict(cfg.tolerance_override or {}))


@dataclass
class Measurement:
    empirical: float
    analytic: float
    tolerance: float
    standard_error: float = 0.0
    inputs: str = ""
    extra_ok: bool = True
    detail: str = ""


@dataclass
class CheckResult:
    name: str
    inputs: str
    empirical: float
    analytic: float
    tolerance: float
    standard_error: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


_CHECKS: dict = {}


def register_check(name: str):
    def decorator(fn):
        _CHECKS[name] = fn
        return fn
    return decorator


def registered_checks() -> list:
    return list(_CHECKS)


# ---------------------------------------------------------
# Closed-form moments
# ---------------------------------------------------------
@register_check("moments_m1")
def _check_m1(cfg: ValidateConfig) -> Measurement:
    report = mc_moments(1.0, 1.0, cfg.mc_samples, cfg.seed)
    return Measurement(report.empirical["m1"], report.analytic["m1"], 0.01 * report.analytic["m1"],
                       report.standard_error["m1"], inputs=f"alpha=1 sigma_R=1 N={cfg.mc_samples}")


@register_check("moments_m2")
def _check_m2(cfg: ValidateConfig) -> Measurement:
    report = mc_moments(1.0, 1.0, cfg.mc_samples, cfg.seed)
    return Measurement(report.empirical["m2"], report.analytic["m2"], 0.02 * report.analytic["m2"],
                       report.standard_error["m2"], inputs=f"alpha=1 sigma_R=1 N={cfg.mc_samples}")


@register_check("moments_alpha_zero")
def _check_moments_alpha_zero(cfg: ValidateConfig) -> Measurement:
    report = mc_moments(0.0, 1.0, 10_000, cfg.seed)
    gap = max(abs(report.empirical["m1"] - 1.0), abs(report.empirical["m2"] - 1.0))
    return Measurement(gap, 0.0, 0.0, inputs="alpha=0 sigma_R=1 N=10000")


@register_check("score")
def _check_score(cfg: ValidateConfig) -> Measurement:
    report = mc_score_and_variance(1.0, 1.0, 1.0, cfg.mc_samples, cfg.seed)
    return Measurement(report.empirical["score"], report.analytic["score"], 0.02,
                       report.standard_error["score"], inputs=f"alpha=1 sigma_R=1 N={cfg.mc_samples}")


@register_check("variance_weight_term")
def _check_weight_variance(cfg: ValidateConfig) -> Measurement:
    report = mc_score_and_variance(1.0, 1.0, 1.0, cfg.mc_samples, cfg.seed)
    analytic = report.analytic["weight_variance"]
    return Measurement(report.empirical["weight_variance"], analytic, 0.05 * analytic,
                       report.standard_error["weight_variance"],
                       inputs=f"alpha=1 sigma_R=1 sigma_L=1 N={cfg.mc_samples}",
                       detail=f"full Var(e^aR L)={report.empirical['full_variance']:.4f} "
                              f"(exact {report.analytic['full_variance']:.4f})")


@register_check("variance_alpha_zero")
def _check_variance_alpha_zero(cfg: ValidateConfig) -> Measurement:
    report = mc_score_and_variance(0.0, 1.0, 1.0, cfg.mc_samples, cfg.seed)
    analytic = report.analytic["full_variance"]
    score_bound = 3.0 / np.sqrt(cfg.mc_samples)
    return Measurement(report.empirical["full_variance"], analytic, 0.03 * analytic,
                       report.standard_error["full_variance"],
                       inputs=f"alpha=0 sigma_R=1 sigma_L=1 N={cfg.mc_samples}",
                       extra_ok=abs(report.empirical["score"]) <= score_bound,
                       detail=f"score={report.empirical['score']:.2e} (bound {score_bound:.2e})")


# ---------------------------------------------------------
# Bisection solver
# ---------------------------------------------------------
def _random_solver_cases(seed: int, n: int = 100):
    rng = np.random.default_rng([seed, 11])
    for _ in range(n):
        # about 0.5 to 50, so x_high = alpha_max^2 sigma_R^2 often lies past the exp range
        sigma_r = 10.0 ** rng.uniform(-0.3, 1.7)
        sigma_l = rng.uniform(0.5, 2.0)
        ratio = 10.0 ** rng.uniform(-3.0, 2.0)  # lambda * sigma_R / sigma_L^2
        yield sigma_r, sigma_l, ratio * sigma_l ** 2 / sigma_r


def _objective_or_inf(alpha, sigma_r, sigma_l, lam):
    try:
        return objective_J(alpha, sigma_r, sigma_l, lam)
    except NumericError:
        return np.inf


@register_check("bisection_vs_grid")
def _check_bisection_grid(cfg: ValidateConfig) -> Measurement:
    worst_cells, compared = 0.0, 0
    for sigma_r, sigma_l, lam in _random_solver_cases(cfg.seed):
        acfg = AlphaConfig(lam=lam, bisect_iters=60, tol=0.0)
        solution = solve_alpha(AlphaStats(sigma_r, 0.0, sigma_l), acfg)
        if solution.clipped:
            continue
        grid = np.linspace(acfg.alpha_min, acfg.alpha_max, 10_000)
        cell = grid[1] - grid[0]
        values = np.array([_objective_or_inf(a, sigma_r, sigma_l, lam) for a in grid])
        worst_cells = max(worst_cells, abs(grid[np.argmin(values)] - solution.alpha) / cell)
        compared += 1
    return Measurement(worst_cells, 0.0, 1.0, inputs="100 random (sigma_R, sigma_L, lambda)",
                       extra_ok=compared > 0, detail=f"{compared} unclipped cases compared")


@register_check("bisection_residual")
def _check_bisection_residual(cfg: ValidateConfig) -> Measurement:
    worst = 0.0
    for sigma_r, sigma_l, lam in _random_solver_cases(cfg.seed):
        solution = solve_alpha(AlphaStats(sigma_r, 0.0, sigma_l), AlphaConfig(lam=lam, bisect_iters=60, tol=1e-12))
        if not solution.clipped:
            worst = max(worst, abs(residual_F(solution.x, sigma_r, sigma_l, lam)))
    return Measurement(worst, 0.0, 1e-5, inputs="100 random cases, M=60")


@register_check("bracket_contraction")
def _check_bracket(cfg: ValidateConfig) -> Measurement:
    acfg = AlphaConfig(lam=1.0, bisect_iters=20, tol=0.0)
    solution = solve_alpha(AlphaStats(1.0, 0.0, 1.0), acfg)
    initial = acfg.alpha_max ** 2 - acfg.alpha_min ** 2
    expected = initial / 2 ** acfg.bisect_iters
    return Measurement((solution.x_high - solution.x_low) / expected, 1.0, 1e-9,
                       inputs="sigma_R=sigma_L=lambda=1 M=20",
                       extra_ok=solution.iterations == acfg.bisect_iters)


# ---------------------------------------------------------
# Trainer
# ---------------------------------------------------------
@register_check("degeneration_to_vanilla")
def _check_degeneration(cfg: ValidateConfig) -> Measurement:
    dataset = generate(DatasetManifest(seed=cfg.seed, trajectories_per_tier=2, horizon=8))
    tcfg = TrainConfig(total_steps=cfg.degeneration_steps, horizon=8, warmup_steps=50,
                       decay_steps=cfg.degeneration_steps, peak_lr=3e-3, decay_lr=3e-4,
                       seed=cfg.seed)
    shape = ModelShape(obs_dim=dataset.manifest.obs_dim, horizon=8, action_dim=2)

    def losses(acfg, mode):
        model = VectorFieldModel(shape, seed=cfg.seed)
        batches = make_batches(dataset, tcfg.batch_size, tcfg.horizon, cfg.seed, verbose=False)
        return np.array([r.loss for r in train(model, batches, tcfg, acfg, mode)])

    vanilla = losses(AlphaConfig(), baseline_mode("vanilla_fm"))
    pinned = losses(AlphaConfig(alpha_min=0.0, alpha_max=0.0), baseline_mode("arfm"))
    return Measurement(float(np.max(np.abs(vanilla - pinned))), 0.0, 0.0,
                       inputs=f"{cfg.degeneration_steps} steps, alpha in [0, 0]",
                       extra_ok=bool(np.array_equal(vanilla, pinned)))


@register_check("finite_difference")
def _check_finite_difference(cfg: ValidateConfig) -> Measurement:
    rng = np.random.default_rng([cfg.seed, 5])
    model = VectorFieldModel(ModelShape(obs_dim=5, horizon=4, action_dim=2, hidden=16), seed=cfg.seed)
    batch = random_check_batch(model, 8, rng)
    weights = energy_weights(rng.standard_normal(8), 1.0)
    coordinates = rng.choice(model.shape.n_params, size=50, replace=False)
    error = finite_diff_check(model, batch, weights, coordinates, h=1e-5)
    return Measurement(error, 0.0, 1e-4, inputs="50 coordinates, h=1e-5")


# ---------------------------------------------------------
# Energy-weighted flow matching
# ---------------------------------------------------------
@register_check("gradient_equivalence")
def _check_equivalence(cfg: ValidateConfig) -> Measurement:
    report = gradient_equivalence_check((-1.0, 0.0, 1.0), beta=1.0, n_draws=cfg.equivalence_draws, seed=cfg.seed)
    return Measurement(report.cosine, 1.0, 0.01, inputs=f"support {{-1,0,1}} beta=1 N={cfg.equivalence_draws}",
                       extra_ok=0.9 <= report.norm_ratio <= 1.1,
                       detail=f"norm_ratio={report.norm_ratio:.4f}")


@register_check("intermediate_energy")
def _check_intermediate_energy(cfg: ValidateConfig) -> Measurement:
    report = intermediate_energy_check((-1.0, 0.0, 1.0), beta=1.0, n_draws=cfg.equivalence_draws, seed=cfg.seed)
    return Measurement(report.empirical, report.analytic, 0.0, report.standard_error,
                       inputs=f"support {{-1,0,1}} beta=1 N={cfg.equivalence_draws}")


@register_check("tilt_identity")
def _check_tilt_identity(cfg: ValidateConfig) -> Measurement:
    spec = TiltSpec(0.0, 1.0, 1.0)
    result = tilt_identity_check(spec)
    gap = max(abs(result["mass"] - 1.0), abs(result["mean"] - result["analytic_mean"]))
    return Measurement(gap, 0.0, 1e-8, inputs="N(0,1), beta=1")


def _tilt_measurement(cfg: ValidateConfig, beta: float, tolerance: float) -> Measurement:
    report = tilt_sampling_check(
        TiltSpec(0.0, 1.0, beta), n_samples=cfg.tilt_samples, train_steps=cfg.tilt_train_steps,
        batch_size=cfg.tilt_batch_size, seed=cfg.seed,
    )
    return Measurement(report.ks_statistic, 0.0, tolerance,
                       inputs=f"N(0,1) beta={beta} n={cfg.tilt_samples} steps={cfg.tilt_train_steps}",
                       detail=f"mean={report.sample_mean:.3f} std={report.sample_std:.3f}")


@register_check("tilt_sampling")
def _check_tilt_sampling(cfg: ValidateConfig) -> Measurement:
    return _tilt_measurement(cfg, 1.0, 0.05)


@register_check("tilt_sampling_control")
def _check_tilt_control(cfg: ValidateConfig) -> Measurement:
    return _tilt_measurement(cfg, 0.0, 0.03)


# ---------------------------------------------------------
# Metrics
# ---------------------------------------------------------
@register_check("nbt_examples")
def _check_nbt(cfg: ValidateConfig) -> Measurement:
    cases = [
        ([[0.6, 0.5], [0.7, 0.5]], 0.0),
        ([[0.6, 0.0], [0.4, 0.9]], 0.2),
        ([[0.6, 0.0, 0.0], [0.0, 0.6, 0.0], [0.8, 0.4, 0.7]], 0.1),
    ]
    gap = max(abs(compute_nbt(matrix) - expected) for matrix, expected in cases)
    return Measurement(gap, 0.0, 1e-12, inputs="three hand-computed SR matrices")


# ---------------------------------------------------------
# Runner
# ---------------------------------------------------------
def run_check(name: str, cfg: ValidateConfig) -> CheckResult:
    if name not in _CHECKS:
        raise ConfigurationError(f"unknown check '{name}', registered: {registered_checks()}")
    m = _CHECKS[name](cfg)
    tolerance = float(cfg.tolerance_override.get(name, m.tolerance))
    bound = max(tolerance, cfg.se_multiplier * m.standard_error)
    passed = bool(np.isfinite(m.empirical) and abs(m.empirical - m.analytic) <= bound and m.extra_ok)
    return CheckResult(
        name=name, inputs=m.inputs, empirical=float(m.empirical), analytic=float(m.analytic),
        tolerance=tolerance, standard_error=float(m.standard_error), passed=passed, detail=m.detail,
    )


def run_suite(cfg: ValidateConfig, verbose: bool = False) -> list:
    unknown = set(cfg.tolerance_override) - set(_CHECKS)
    if unknown:
        raise ConfigurationError(f"tolerance_override names unknown checks: {sorted(unknown)}")
    names = list(cfg.checks) if cfg.checks else registered_checks()

    results = []
    for name in names:
        result = run_check(name, cfg)
        results.append(result)
        if verbose:
            tag = "[OK]" if result.passed else "[ERROR]"
            print(f"{tag} {name}: empirical={result.empirical:.6g} analytic={result.analytic:.6g} "
                  f"tol={result.tolerance:.3g} se={result.standard_error:.3g} {result.detail}")
    return results


def results_frame(results) -> pd.DataFrame:
    columns = ["name", "inputs", "empirical", "analytic", "tolerance", "standard_error", "passed", "detail"]
    return pd.DataFrame([r.to_dict() for r in results], columns=columns)
