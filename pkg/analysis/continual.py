"""
Two-phase continual protocol on task groups.

Phase 1 trains on group A. Phase 2 continues the same model and optimizer
on a reduced share of group A's demonstrations plus all of group B.
Success rates per phase x group form the SR matrix the NBT metric reads.
"""
import numpy as np
import pandas as pd

from analysis.evaluate import compute_nbt, evaluate_policy, success_rate
from ml.environment import PointMassEnv
from ml.errors import ConfigurationError
from ml.inference import Policy
from ml.train_model import train_on_dataset


def phase_two_dataset(dataset, group_a, group_b, old_share: float, seed: int):
    if not 0.0 <= old_share <= 1.0:
        raise ConfigurationError(f"phase2_old_share must lie in [0, 1], got {old_share}")
    rng = np.random.default_rng(seed)
    old = [i for i, tr in enumerate(dataset.trajectories) if tr.task_id in set(group_a)]
    new = [i for i, tr in enumerate(dataset.trajectories) if tr.task_id in set(group_b)]
    keep = int(round(old_share * len(old)))
    kept_old = sorted(rng.choice(old, size=keep, replace=False).tolist()) if keep else []
    return dataset.subset(kept_old + new)


def run_continual(dataset, cfg, acfg, mode, eval_cfg, continual: dict,
                  verbose: bool = False) -> tuple:
    """Returns (sr_matrix frame, nbt)."""
    group_a = [int(t) for t in continual.get("group_a", [])]
    group_b = [int(t) for t in continual.get("group_b", [])]
    if not group_a or not group_b or set(group_a) & set(group_b):
        raise ConfigurationError(f"continual groups must be non-empty and disjoint, got {group_a} / {group_b}")
    known = set(range(dataset.manifest.num_tasks))
    if not set(group_a + group_b) <= known:
        raise ConfigurationError(f"continual groups reference unknown tasks; dataset has {sorted(known)}")

    env = PointMassEnv.from_manifest(dataset.manifest)
    phases = [
        ("phase_1", dataset.for_tasks(group_a)),
        ("phase_2", phase_two_dataset(dataset, group_a, group_b,
                                      float(continual.get("phase2_old_share", 0.5)), cfg.seed)),
    ]

    state = None
    sr = np.zeros((len(phases), 2))
    for i, (name, phase_data) in enumerate(phases):
        if verbose:
            print(f"[INFO] {name}: {len(phase_data)} trajectories")
        state = train_on_dataset(phase_data, cfg, acfg, mode, verbose=verbose, state=state)
        report = evaluate_policy(Policy(state.model, euler_steps=eval_cfg.euler_steps), env, eval_cfg,
                                 tasks=group_a + group_b)
        sr[i] = [success_rate(report, tasks=group_a), success_rate(report, tasks=group_b)]

    nbt = compute_nbt(sr)
    frame = pd.DataFrame({
        "phase": [name for name, _ in phases],
        "sr_group_a": sr[:, 0],
        "sr_group_b": sr[:, 1],
        "nbt": nbt,
    })
    if verbose:
        print(f"[OK] NBT = {nbt:.4f}")
    return frame, nbt
