import subprocess
import sys
import os
from pathlib import Path

# -------------------------------------------------
# Resolve project root and ensure imports work
# -------------------------------------------------
SCRIPT_PATH = Path(__file__).resolve()
PROJECT_ROOT = SCRIPT_PATH.parents[1]

if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from config.paths import CHECKPOINT_NAME, DATASET_NAME, output_root

MODES = ("arfm", "vanilla_fm")


# -------------------------------------------------
# Subprocess runner
# -------------------------------------------------
def run_step(command: str, args=None):
    """
    Run one CLI subcommand in a clean subprocess.
    """
    print(f"\n--- [Executing: {command}] ---")

    cmd = [sys.executable, "-m", "cli.main", command]
    if args:
        cmd.extend(args)

    env = os.environ.copy()
    env["PYTHONPATH"] = str(PROJECT_ROOT)

    try:
        subprocess.run(
            cmd,
            cwd=str(PROJECT_ROOT),
            env=env,
            check=True,
        )
    except subprocess.CalledProcessError as e:
        print(f"❌ Error in {command} (exit {e.returncode}). Pipeline aborted.")
        sys.exit(1)


# -------------------------------------------------
# Main pipeline
# -------------------------------------------------
def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    extra = argv  # forwarded to every step, e.g. --config my.yaml --seed 3
    run_root = output_root() / "pipeline"

    print("🚀 STARTING ADAPTIVE REINFORCED FLOW MATCHING PIPELINE")
    print(f"[INFO] Outputs under: {run_root}")

    # ---- Data ----
    run_step("gen-data", ["--out", str(run_root)] + extra)
    dataset = run_root / DATASET_NAME

    # ---- Training + evaluation per mode ----
    for mode in MODES:
        print(f"\n🧠 Training and evaluating: {mode}")
        mode_dir = run_root / mode
        run_step("train", ["--mode", mode, "--dataset", str(dataset), "--out", str(mode_dir)] + extra)
        run_step("eval", ["--checkpoint", str(mode_dir / CHECKPOINT_NAME), "--out", str(mode_dir / "eval")] + extra)
        for run_dir in (mode_dir, mode_dir / "eval"):
            run_step("plot", ["--run-dir", str(run_dir)] + extra)

    # ---- Oracles ----
    print("\n🔍 Running the validation suite...")
    run_step("validate", ["--out", str(run_root / "validate")] + extra)

    # ---- ARFM against every baseline, several seeds ----
    print("\n📊 Comparing ARFM with the baselines across seeds...")
    compare_dir = run_root / "compare"
    run_step("compare", ["--out", str(compare_dir)] + extra)
    run_step("plot", ["--run-dir", str(compare_dir)] + extra)

    print("\n" + "=" * 60)
    print("✅ PIPELINE EXECUTION COMPLETE")
    print("=" * 60)


if __name__ == "__main__":
    main()
