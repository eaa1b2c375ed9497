import sys

from cli import commands
from cli.args import build_parser
from config.settings import cli_overrides, load_run_config
from ml.errors import ARFMError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2


def dispatch(args, config) -> int:
    verbose = not args.quiet
    if args.command == "gen-data":
        return commands.cmd_gen_data(config, verbose=verbose)
    if args.command == "train":
        return commands.cmd_train(config, args.dataset, verbose=verbose)
    if args.command == "eval":
        return commands.cmd_eval(config, args.checkpoint, verbose=verbose)
    if args.command == "ablate":
        return commands.cmd_ablate(config, args.dataset, verbose=verbose)
    if args.command == "validate":
        return commands.cmd_validate(config, args.checks, verbose=verbose)
    if args.command == "plot":
        return commands.cmd_plot(config, args.run_dir, verbose=verbose)
    if args.command == "continual":
        return commands.cmd_continual(config, args.dataset, verbose=verbose)
    if args.command == "compare":
        return commands.cmd_compare(config, args.seeds, verbose=verbose)
    raise ValueError(f"unhandled command {args.command}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = cli_overrides(
            seed=args.seed, out=args.out,
            mode=getattr(args, "mode", None), alpha0=getattr(args, "alpha0", None),
        )
        config = load_run_config(args.config, overrides)
        return dispatch(args, config)
    except ARFMError as e:
        print(f"[ERROR] {type(e).__name__}: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
