import os
from pathlib import Path

# __file__ is <project-root>/config/paths.py
_this_file = Path(__file__).resolve()

# PROJECT_ROOT = <project-root>/
PROJECT_ROOT = _this_file.parents[1]

# Default RunConfig tree shipped with the repository
CONFIG_DIR = PROJECT_ROOT / "config"
DEFAULTS_FILE = CONFIG_DIR / "defaults.yaml"

# OUTPUT_ROOT = $ARFM_OUTPUT_ROOT or <project-root>/runs/
OUTPUT_ROOT_ENV = "ARFM_OUTPUT_ROOT"


def output_root() -> Path:
    """Resolved at call time so tests can point the env var at tmp_path."""
    env_value = os.environ.get(OUTPUT_ROOT_ENV)
    if env_value:
        return Path(env_value).expanduser().resolve()
    return PROJECT_ROOT / "runs"


# File names written inside every run directory
RESOLVED_CONFIG_NAME = "run_config.yaml"
DATASET_NAME = "dataset.jsonl"
CHECKPOINT_NAME = "checkpoint.joblib"
TRAINING_TRACE_NAME = "training_trace.csv"
ALPHA_TRACE_NAME = "alpha_trace.csv"
EVAL_REPORT_NAME = "eval_report.csv"
ABLATION_NAME = "ablation.csv"
VALIDATION_NAME = "validation.csv"
CONTINUAL_NAME = "continual.csv"
COMPARISON_NAME = "comparison.csv"
VERDICT_NAME = "comparison_verdict.csv"
PLOTS_DIR_NAME = "plots"
