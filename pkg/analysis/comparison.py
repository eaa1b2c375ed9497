"""
Seed-by-seed comparison of ARFM against its baselines.

Every seed regenerates the demonstration set and retrains each mode from
scratch under that seed. Evaluation episodes use the shared eval seed, so
within a seed all modes face the same rollout draws. ARFM passes a seed
when its mean final goal distance is no larger than vanilla FM's and its
success rate is at most `sr_margin` below vanilla FM's.
"""
from dataclasses import asdict, dataclass, replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from analysis.evaluate import binomial_se, evaluate_policy, success_rate
from config.settings import build_section, plain
from ml.build_dataset import generate
from ml.environment import PointMassEnv
from ml.errors import ConfigurationError
from ml.inference import Policy
from ml.train_model import train_on_dataset
from ml.weighting import MODES, baseline_mode

COMPARISON_COLUMNS = [
    "seed", "mode", "success_rate", "success_se", "mean_goal_distance", "final_loss",
    "mean_alpha", "clipped_share",
]
VERDICT_COLUMNS = [
    "seed", "arfm_goal_distance", "vanilla_goal_distance", "arfm_success_rate",
    "vanilla_success_rate", "goal_ok", "success_ok", "passed",
]


@dataclass(frozen=True)
class CompareConfig:
    seeds: tuple = (0, 1, 2)
    modes: tuple = MODES
    fixed_alpha0: float = 1.0   # alpha of the fixed_alpha baseline
    sr_margin: float = 0.01     # tolerated SR shortfall, one percentage point
    n_jobs: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("compare needs at least one seed")
        unknown = [m for m in self.modes if m not in MODES]
        if unknown:
            raise ConfigurationError(f"unknown modes {unknown}, expected a subset of {MODES}")
        if "arfm" not in self.modes or "vanilla_fm" not in self.modes:
            raise ConfigurationError("compare needs both 'arfm' and 'vanilla_fm' in modes")
        if self.sr_margin < 0:
            raise ConfigurationError(f"sr_margin must be >= 0, got {self.sr_margin}")

    @classmethod
    def from_section(cls, section: dict | None) -> "CompareConfig":
        return build_section(cls, section, "compare")

    def to_section(self) -> dict:
        return plain(asdict(self))


@dataclass
class ComparisonResult:
    runs: pd.DataFrame
    verdict: pd.DataFrame

    @property
    def passed(self) -> bool:
        return bool(self.verdict["passed"].all())


# ---------------------------------------------------------
# Runs
# ---------------------------------------------------------
def run_mode(seed: int, mode_name: str, manifest, weights, cfg, acfg, eval_cfg, fixed_alpha0: float) -> dict:
    dataset = generate(replace(manifest, seed=seed), weights)
    mode = baseline_mode(mode_name, fixed_alpha0 if mode_name == "fixed_alpha" else 0.0)
    state = train_on_dataset(dataset, replace(cfg, seed=seed), acfg, mode)

    env = PointMassEnv.from_manifest(dataset.manifest)
    report = evaluate_policy(Policy(state.model, euler_steps=eval_cfg.euler_steps), env, eval_cfg)
    episodes = int(report.rows["episodes"].sum()) if not report.rows.empty else 0
    rate = success_rate(report)
    tail = state.reports[-min(50, len(state.reports)):]
    return {
        "seed": seed,
        "mode": mode_name,
        "success_rate": rate,
        "success_se": binomial_se(rate, episodes),
        "mean_goal_distance": float(report.rows["mean_goal_distance"].mean()) if episodes else float("nan"),
        "final_loss": float(np.mean([r.loss for r in tail])),
        "mean_alpha": float(np.mean([r.alpha for r in state.reports])),
        "clipped_share": float(np.mean([r.alpha_clipped for r in state.reports])),
    }


def directional_verdict(runs: pd.DataFrame, sr_margin: float = 0.01) -> pd.DataFrame:
    """One row per seed: ARFM against vanilla FM on goal distance and success rate."""
    rows = []
    for seed, part in runs.groupby("seed", sort=True):
        by_mode = part.set_index("mode")
        if not {"arfm", "vanilla_fm"} <= set(by_mode.index):
            raise ConfigurationError(f"seed {seed} lacks an arfm or vanilla_fm run")
        arfm, vanilla = by_mode.loc["arfm"], by_mode.loc["vanilla_fm"]
        goal_ok = bool(arfm["mean_goal_distance"] <= vanilla["mean_goal_distance"])
        success_ok = bool(arfm["success_rate"] >= vanilla["success_rate"] - sr_margin)
        rows.append({
            "seed": int(seed),
            "arfm_goal_distance": float(arfm["mean_goal_distance"]),
            "vanilla_goal_distance": float(vanilla["mean_goal_distance"]),
            "arfm_success_rate": float(arfm["success_rate"]),
            "vanilla_success_rate": float(vanilla["success_rate"]),
            "goal_ok": goal_ok,
            "success_ok": success_ok,
            "passed": goal_ok and success_ok,
        })
    return pd.DataFrame(rows, columns=VERDICT_COLUMNS)


def run_comparison(manifest, weights, cfg, acfg, eval_cfg, compare: CompareConfig,
                   verbose: bool = False) -> ComparisonResult:
    jobs = [
        (int(seed), mode, manifest, weights, cfg, acfg, eval_cfg, compare.fixed_alpha0)
        for seed in compare.seeds for mode in compare.modes
    ]
    if verbose:
        print(f"[INFO] compare: {len(jobs)} training runs on {compare.n_jobs} worker(s)")
    rows = Parallel(n_jobs=compare.n_jobs)(delayed(run_mode)(*job) for job in jobs)
    runs = pd.DataFrame(rows, columns=COMPARISON_COLUMNS)
    verdict = directional_verdict(runs, compare.sr_margin)

    if verbose:
        for row in verdict.itertuples(index=False):
            tag = "[OK]" if row.passed else "[WARN]"
            print(f"{tag} seed {row.seed}: goal_err arfm={row.arfm_goal_distance:.4f} "
                  f"vanilla={row.vanilla_goal_distance:.4f}, SR arfm={row.arfm_success_rate:.3f} "
                  f"vanilla={row.vanilla_success_rate:.3f}")
    return ComparisonResult(runs=runs, verdict=verdict)
