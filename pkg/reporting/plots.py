import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

from config.paths import (
    ABLATION_NAME, ALPHA_TRACE_NAME, COMPARISON_NAME, CONTINUAL_NAME, EVAL_REPORT_NAME, PLOTS_DIR_NAME,
    TRAINING_TRACE_NAME,
)


def load_csv(file_path):
    if not file_path.exists():
        print(f"[SKIP] {file_path.name} not found")
        return None
    df = pd.read_csv(file_path)
    if df.empty:
        print(f"[SKIP] {file_path.name} is empty")
        return None
    return df


def _save(fig, out_dir, name):
    target = out_dir / name
    fig.savefig(target, bbox_inches="tight")
    plt.close(fig)
    print(f"[OK] Created: {target.name}")
    return target


# ---------------------------------------------------------
# Individual charts
# ---------------------------------------------------------
def plot_training_curves(df, out_dir):
    fig, axes = plt.subplots(1, 3, figsize=(15, 4))
    sns.lineplot(data=df, x="step", y="loss", ax=axes[0], label="weighted loss")
    sns.lineplot(data=df, x="step", y="mean_fm_loss", ax=axes[0], label="mean FM loss")
    axes[0].set_yscale("log")
    axes[0].set_title("Training loss")
    sns.lineplot(data=df, x="step", y="weight_entropy", ax=axes[1])
    axes[1].set_title("Weight entropy")
    sns.lineplot(data=df, x="step", y="lr", ax=axes[2])
    axes[2].set_title("Learning rate")
    return _save(fig, out_dir, "training_curves.png")


def plot_alpha_trace(df, out_dir):
    fig, ax = plt.subplots(figsize=(10, 4))
    sns.lineplot(data=df, x="step", y="alpha", ax=ax, label="alpha*")
    clipped = df[df["clipped"].astype(bool)]
    if not clipped.empty:
        ax.scatter(clipped["step"], clipped["alpha"], s=6, color="#d62728", label="clipped")
    ax.set_title("Solved scaling factor per step")
    ax.legend()
    return _save(fig, out_dir, "alpha_trace.png")


def plot_ablation(df, out_dir):
    grids = list(df["grid"].unique())
    fig, axes = plt.subplots(1, len(grids), figsize=(5 * len(grids), 4), squeeze=False)
    for ax, grid in zip(axes[0], grids):
        part = df[df["grid"] == grid].sort_values("value")
        ax.errorbar(part["value"].astype(str), part["success_rate"], yerr=part["success_se"], marker="o")
        ax.set_title(f"Success rate vs {grid}")
        ax.set_ylim(0, 1.05)
    return _save(fig, out_dir, "ablation.png")


def plot_eval(df, out_dir):
    fig, ax = plt.subplots(figsize=(8, 4))
    sns.barplot(data=df, x="noise_level", y="success_rate", hue="task_id", ax=ax)
    ax.set_title("Success rate per action-noise level")
    ax.set_ylim(0, 1.05)
    return _save(fig, out_dir, "eval_success.png")


def plot_continual(df, out_dir):
    fig, ax = plt.subplots(figsize=(6, 4))
    melted = df.melt(id_vars=["phase"], value_vars=["sr_group_a", "sr_group_b"],
                     var_name="group", value_name="success_rate")
    sns.barplot(data=melted, x="phase", y="success_rate", hue="group", ax=ax)
    ax.set_title(f"Continual protocol (NBT = {df['nbt'].iloc[0]:.3f})")
    ax.set_ylim(0, 1.05)
    return _save(fig, out_dir, "continual.png")


def plot_comparison(df, out_dir):
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    sns.barplot(data=df, x="mode", y="mean_goal_distance", hue="seed", ax=axes[0])
    axes[0].set_title("Final goal distance per mode")
    sns.barplot(data=df, x="mode", y="success_rate", hue="seed", ax=axes[1])
    axes[1].set_title("Success rate per mode")
    axes[1].set_ylim(0, 1.05)
    return _save(fig, out_dir, "comparison.png")


PLOTTERS = {
    TRAINING_TRACE_NAME: plot_training_curves,
    ALPHA_TRACE_NAME: plot_alpha_trace,
    ABLATION_NAME: plot_ablation,
    EVAL_REPORT_NAME: plot_eval,
    CONTINUAL_NAME: plot_continual,
    COMPARISON_NAME: plot_comparison,
}


def render_run(run_dir) -> list:
    """Renders every chart whose CSV exists in `run_dir` into run_dir/plots/."""
    out_dir = run_dir / PLOTS_DIR_NAME
    out_dir.mkdir(parents=True, exist_ok=True)
    sns.set_theme(style="whitegrid")

    created = []
    for csv_name, plotter in PLOTTERS.items():
        df = load_csv(run_dir / csv_name)
        if df is not None:
            created.append(plotter(df, out_dir))
    return created
