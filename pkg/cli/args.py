import argparse

from ml.weighting import MODES

COMMANDS = ("gen-data", "train", "eval", "ablate", "validate", "plot", "continual", "compare")


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=str, default=None, help="YAML file deep-merged over config/defaults.yaml")
    parser.add_argument("--seed", type=int, default=None, help="Overrides seed, trainer.seed and manifest.seed")
    parser.add_argument("--out", type=str, default=None, help="Output directory (default: $ARFM_OUTPUT_ROOT/<command>)")
    parser.add_argument("--quiet", action="store_true", help="No progress bars or per-step logging")


def _training(parser: argparse.ArgumentParser):
    parser.add_argument("--mode", type=str, choices=MODES, default=None)
    parser.add_argument("--alpha0", type=float, default=None, help="Constant alpha for --mode fixed_alpha")
    parser.add_argument("--dataset", type=str, default=None, help="Dataset file (default: generated from the manifest)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arfm",
        description="Adaptive reinforced flow matching on synthetic point-mass demonstrations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="Generate the mixed-quality demonstration dataset")
    _common(p)

    p = sub.add_parser("train", help="Train a policy (arfm | vanilla_fm | fixed_alpha | rwr)")
    _common(p)
    _training(p)

    p = sub.add_parser("eval", help="Roll out a checkpoint in the point-mass environment")
    _common(p)
    p.add_argument("--checkpoint", type=str, required=True)

    p = sub.add_parser("ablate", help="Lambda / M / shots grids")
    _common(p)
    _training(p)

    p = sub.add_parser("validate", help="Run the numerical oracle suite")
    _common(p)
    p.add_argument("--checks", nargs="*", default=None, help="Subset of registered check names")

    p = sub.add_parser("plot", help="Render PNG charts from the CSVs of a run directory")
    _common(p)
    p.add_argument("--run-dir", type=str, required=True)

    p = sub.add_parser("continual", help="Two-phase continual protocol and NBT")
    _common(p)
    _training(p)

    p = sub.add_parser("compare", help="ARFM against every baseline over several seeds")
    _common(p)
    p.add_argument("--seeds", nargs="+", type=int, default=None, help="Overrides compare.seeds")

    return parser
