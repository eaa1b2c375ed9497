"""
Ablation grids: trade-off weight lambda, bisection budget M and the
number of demonstrations per task and tier (few-shot). Each grid point is
an independent training run with the shared seed; points run in parallel
through joblib.

For M, each row additionally reports how far the per-step alpha drifts from
the reference budget when the reference run's recorded batch statistics are
re-solved with that M.
"""
from dataclasses import replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from analysis.evaluate import evaluate_policy, success_rate, binomial_se
from ml.alpha_solver import resolve_alpha_trace
from ml.build_dataset import generate
from ml.environment import PointMassEnv
from ml.inference import Policy
from ml.train_model import alpha_frame, train_on_dataset

ABLATION_COLUMNS = [
    "grid", "value", "success_rate", "success_se", "mean_goal_distance", "final_loss",
    "mean_alpha", "alpha_deviation",
]


def run_point(grid: str, value, dataset, cfg, acfg, mode, eval_cfg) -> dict:
    state = train_on_dataset(dataset, cfg, acfg, mode)
    env = PointMassEnv.from_manifest(dataset.manifest)
    report = evaluate_policy(Policy(state.model, euler_steps=eval_cfg.euler_steps), env, eval_cfg)
    rate = success_rate(report)
    episodes = int(report.rows["episodes"].sum()) if not report.rows.empty else 0
    tail = state.reports[-min(50, len(state.reports)):]
    return {
        "grid": grid,
        "value": value,
        "success_rate": rate,
        "success_se": binomial_se(rate, episodes),
        "mean_goal_distance": float(report.rows["mean_goal_distance"].mean()) if episodes else float("nan"),
        "final_loss": float(np.mean([r.loss for r in tail])),
        "mean_alpha": float(np.mean([r.alpha for r in state.reports])),
        "alpha_deviation": float("nan"),
        "_alpha_trace": alpha_frame(state.reports),
    }


def m_stability(reference_trace: pd.DataFrame, acfg, m_grid, m_reference: int) -> dict:
    """Mean per-step |alpha(M) - alpha(M_ref)| on the reference run's statistics."""
    reference = resolve_alpha_trace(reference_trace, replace(acfg, bisect_iters=m_reference))
    return {
        m: float(np.mean(np.abs(resolve_alpha_trace(reference_trace, replace(acfg, bisect_iters=m)) - reference)))
        for m in m_grid
    }


def run_ablation(dataset, cfg, acfg, mode, eval_cfg, ablation: dict, verbose: bool = False) -> pd.DataFrame:
    lambda_grid = list(ablation.get("lambda_grid") or [])
    m_grid = [int(m) for m in ablation.get("m_grid") or []]
    shots_grid = [int(s) for s in ablation.get("shots_grid") or []]
    m_reference = int(ablation.get("m_reference", 40))
    n_jobs = int(ablation.get("n_jobs", 1))

    jobs = [("lambda", lam, dataset, cfg, replace(acfg, lam=float(lam)), mode, eval_cfg) for lam in lambda_grid]
    jobs += [("M", m, dataset, cfg, replace(acfg, bisect_iters=m), mode, eval_cfg) for m in m_grid]
    for shots in shots_grid:
        manifest = replace(dataset.manifest, trajectories_per_tier=shots)
        jobs.append(("shots", shots, generate(manifest), cfg, acfg, mode, eval_cfg))
    if m_grid and m_reference not in m_grid:
        jobs.append(("M_reference", m_reference, dataset, cfg, replace(acfg, bisect_iters=m_reference), mode, eval_cfg))

    if verbose:
        print(f"[INFO] ablation: {len(jobs)} training runs on {n_jobs} worker(s)")
    rows = Parallel(n_jobs=n_jobs)(delayed(run_point)(*job) for job in jobs)

    if m_grid:
        reference = next(r for r in rows if r["grid"] in ("M", "M_reference") and r["value"] == m_reference)
        deviations = m_stability(reference["_alpha_trace"], acfg, m_grid, m_reference)
        for row in rows:
            if row["grid"] == "M":
                row["alpha_deviation"] = deviations[row["value"]]
        rows = [r for r in rows if r["grid"] != "M_reference"]

    for row in rows:
        row.pop("_alpha_trace")
        if verbose:
            print(f"[OK] {row['grid']}={row['value']}: SR={row['success_rate']:.3f} "
                  f"loss={row['final_loss']:.4f} mean_alpha={row['mean_alpha']:.4g}")
    return pd.DataFrame(rows, columns=ABLATION_COLUMNS)
