"""
One function per subcommand. Each takes the resolved RunConfig tree,
writes it beside its outputs and returns the process exit code.
"""
from pathlib import Path

from analysis.ablation import run_ablation
from analysis.comparison import CompareConfig, run_comparison
from analysis.continual import run_continual
from analysis.evaluate import EvalConfig, evaluate_policy
from analysis.rewards import RewardWeights
from config.paths import (
    ABLATION_NAME, CHECKPOINT_NAME, COMPARISON_NAME, CONTINUAL_NAME, DATASET_NAME, EVAL_REPORT_NAME,
    VALIDATION_NAME, VERDICT_NAME,
)
from config.settings import resolve_output_dir, write_resolved_config
from ml import build_dataset
from ml.alpha_solver import AlphaConfig
from ml.build_dataset import DatasetManifest
from ml.environment import PointMassEnv
from ml.errors import ConfigurationError
from ml.inference import Policy
from ml.train_model import TrainConfig, save_checkpoint, train_on_dataset
from ml.weighting import baseline_mode
from reporting.plots import render_run
from validation.suite import ValidateConfig, results_frame, run_suite


def _manifest(config) -> DatasetManifest:
    return DatasetManifest.from_section(config.get("manifest"))


def _training_views(config) -> tuple:
    mode_section = config.get("mode") or {}
    return (
        TrainConfig.from_section(config.get("trainer")),
        AlphaConfig.from_section(config.get("alpha")),
        baseline_mode(mode_section.get("name", "arfm"), mode_section.get("alpha0", 0.0)),
    )


def _dataset(config, out_dir: Path, dataset_path=None, generate_missing: bool = True, verbose: bool = True):
    path = Path(dataset_path) if dataset_path else out_dir / DATASET_NAME
    if path.exists():
        if verbose:
            print(f"[INFO] Loading dataset: {path}")
        return build_dataset.load(path)
    if not generate_missing:
        raise ConfigurationError(f"dataset not found: {path} (run gen-data first or pass --dataset)")
    if verbose:
        print(f"[INFO] No dataset at {path}; generating from the manifest")
    return build_dataset.generate(_manifest(config), RewardWeights.from_section(config.get("rewards")))


# ---------------------------------------------------------
# Subcommands
# ---------------------------------------------------------
def cmd_gen_data(config, verbose: bool = True) -> int:
    out_dir = resolve_output_dir(config, "gen-data")
    write_resolved_config(config, out_dir)
    dataset = build_dataset.generate(_manifest(config), RewardWeights.from_section(config.get("rewards")))
    target = build_dataset.save(dataset, out_dir / DATASET_NAME)
    if verbose:
        successes = sum(tr.success for tr in dataset.trajectories)
        print(f"[OK] {len(dataset)} trajectories ({successes} successful) written to: {target}")
    return 0


def cmd_train(config, dataset_path=None, verbose: bool = True) -> int:
    out_dir = resolve_output_dir(config, "train")
    write_resolved_config(config, out_dir)
    cfg, acfg, mode = _training_views(config)
    dataset = _dataset(config, out_dir, dataset_path, generate_missing=False, verbose=verbose)

    state = train_on_dataset(dataset, cfg, acfg, mode, out_dir=out_dir, verbose=verbose)
    target = save_checkpoint(out_dir / CHECKPOINT_NAME, state.model, cfg, state.step, acfg, mode,
                             optimizer=state.optimizer)
    if verbose:
        first, last = state.reports[0], state.reports[-1]
        print(f"[OK] {mode.name}: loss {first.loss:.4f} -> {last.loss:.4f} over {state.step} steps")
        print(f"[OK] Checkpoint saved to: {target}")
    return 0


def cmd_eval(config, checkpoint, verbose: bool = True) -> int:
    out_dir = resolve_output_dir(config, "eval")
    write_resolved_config(config, out_dir)
    eval_cfg = EvalConfig.from_section(config.get("eval"))
    policy = Policy.from_checkpoint(checkpoint, euler_steps=eval_cfg.euler_steps)
    env = PointMassEnv.from_manifest(_manifest(config))

    report = evaluate_policy(policy, env, eval_cfg, verbose=verbose)
    report.rows.to_csv(out_dir / EVAL_REPORT_NAME, index=False)
    if verbose:
        if report.zero_episodes:
            print("[WARN] zero episodes requested: empty report")
        else:
            print(report.overall().to_string(index=False))
        print(f"[OK] Evaluation saved to: {out_dir / EVAL_REPORT_NAME}")
    return 0


def cmd_ablate(config, dataset_path=None, verbose: bool = True) -> int:
    out_dir = resolve_output_dir(config, "ablate")
    write_resolved_config(config, out_dir)
    cfg, acfg, mode = _training_views(config)
    dataset = _dataset(config, out_dir, dataset_path, verbose=verbose)

    frame = run_ablation(dataset, cfg, acfg, mode, EvalConfig.from_section(config.get("eval")),
                         config.get("ablation") or {}, verbose=verbose)
    frame.to_csv(out_dir / ABLATION_NAME, index=False)
    if verbose:
        print(f"[OK] {len(frame)} ablation rows saved to: {out_dir / ABLATION_NAME}")
    return 0


def cmd_validate(config, checks=None, verbose: bool = True) -> int:
    out_dir = resolve_output_dir(config, "validate")
    section = dict(config.get("validate") or {})
    if checks:
        section["checks"] = list(checks)
    write_resolved_config({**config, "validate": section}, out_dir)

    results = run_suite(ValidateConfig.from_section(section, seed=config.get("seed", 0)), verbose=verbose)
    results_frame(results).to_csv(out_dir / VALIDATION_NAME, index=False)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"[ERROR] {len(failed)}/{len(results)} checks failed: {', '.join(failed)}")
        return 1
    if verbose:
        print(f"[OK] all {len(results)} checks passed")
    return 0


def cmd_plot(config, run_dir, verbose: bool = True) -> int:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ConfigurationError(f"run directory not found: {run_dir}")
    created = render_run(run_dir)
    if verbose:
        print(f"[OK] {len(created)} chart(s) rendered")
    return 0


def cmd_continual(config, dataset_path=None, verbose: bool = True) -> int:
    out_dir = resolve_output_dir(config, "continual")
    write_resolved_config(config, out_dir)
    cfg, acfg, mode = _training_views(config)
    dataset = _dataset(config, out_dir, dataset_path, verbose=verbose)

    frame, nbt = run_continual(dataset, cfg, acfg, mode, EvalConfig.from_section(config.get("eval")),
                               config.get("continual") or {}, verbose=verbose)
    frame.to_csv(out_dir / CONTINUAL_NAME, index=False)
    if verbose:
        print(f"[OK] NBT={nbt:.4f}; saved to: {out_dir / CONTINUAL_NAME}")
    return 0


def cmd_compare(config, seeds=None, verbose: bool = True) -> int:
    out_dir = resolve_output_dir(config, "compare")
    section = dict(config.get("compare") or {})
    if seeds:
        section["seeds"] = [int(s) for s in seeds]
    write_resolved_config({**config, "compare": section}, out_dir)
    cfg, acfg, _ = _training_views(config)

    result = run_comparison(
        _manifest(config), RewardWeights.from_section(config.get("rewards")), cfg, acfg,
        EvalConfig.from_section(config.get("eval")), CompareConfig.from_section(section), verbose=verbose,
    )
    result.runs.to_csv(out_dir / COMPARISON_NAME, index=False)
    result.verdict.to_csv(out_dir / VERDICT_NAME, index=False)
    if not result.passed:
        failed = result.verdict.loc[~result.verdict["passed"], "seed"].tolist()
        print(f"[ERROR] ARFM trails vanilla FM on seed(s) {failed}; see {out_dir / VERDICT_NAME}")
        return 1
    if verbose:
        print(f"[OK] ARFM matches or beats vanilla FM on all {len(result.verdict)} seeds; "
              f"saved to: {out_dir / COMPARISON_NAME}")
    return 0
