from typing import Final, Optional, Sequence

import argparse
import json
import logging
import sys

import Gradient_Reversal_Adaptation.Configurations.ConfigExceptions as ConfigExceptions
import Gradient_Reversal_Adaptation.Configurations.LoadConfig as LoadConfig
import Gradient_Reversal_Adaptation.Configurations.StoreConfig as StoreConfig
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions
from Gradient_Reversal_Adaptation.Experiments.Harness import Experiment, CellError
from Gradient_Reversal_Adaptation.Experiments.LogSetup import setup_logging
from Gradient_Reversal_Adaptation.Experiments.RunDirectory import RunDirectory, LOG_FILE

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_ID: Final[int] = 1
EXIT_RUNTIME: Final[int] = 1
EXIT_USAGE: Final[int] = 2
COMMANDS: Final[tuple[str, ...]] = ("gen-data", "train", "adapt", "eval", "grid", "sweep", "report")


class UsageError(ValueError):
    """
    Raised if the command line is malformed.
    """

    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="gra",
        description="Unsupervised adaptation of a frame classifier to far-field speech with a gradient reversal layer.",
    )
    common = _Parser(add_help=False)
    common.add_argument("--run-dir", required=True, help="Directory receiving every output of the run")
    common.add_argument("--config-id", type=int, help="Id of the configuration in the configuration file")
    common.add_argument("--config-file", help="Configuration file (default: the packaged experiments.csv)")
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Overrides a configuration field (repeatable)",
    )
    common.add_argument("--force", action="store_true", help="Overwrite existing outputs")
    common.add_argument("--log-level", default="INFO", help="Lowest level of the log messages")
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")
    commands.add_parser("gen-data", parents=[common], help="Generate the synthetic corpus")
    commands.add_parser("train", parents=[common], help="Training stage on the labeled source data (every seed)")
    commands.add_parser("adapt", parents=[common], help="Adaptation with the best coefficient and feature layer")
    commands.add_parser("eval", parents=[common], help="Error of the adapted networks on the target test data")
    commands.add_parser("grid", parents=[common], help="Grid over the coefficient and the feature layer")
    sweep = commands.add_parser("sweep", parents=[common], help="Sweep over the amount of adaptation data")
    sweep.add_argument("--language", help="Language of the adaptation data (default: source language)")
    commands.add_parser("report", parents=[common], help="Check the stored tables and write the report")
    return parser


def _overrides(assignments: Sequence[str]) -> dict[str, str]:
    overrides = {}
    for assignment in assignments:
        key, separator, value = assignment.partition("=")
        if not separator or not key.strip():
            raise UsageError(f"--set expects KEY=VALUE (got {assignment!r})")
        overrides[key.strip()] = value.strip()
    return overrides


def resolve_config(args: argparse.Namespace, run: RunDirectory) -> StoreConfig.ExperimentConfig:
    """
    Configuration of a command: the selected preset, else the snapshot of the run directory, else the default preset;
    overrides are applied last.
    """
    if args.config_file is not None or args.config_id is not None:
        loader = LoadConfig.LoadParameters(args.config_id or DEFAULT_CONFIG_ID, args.config_file)
        loader.adjust_parameters(**_overrides(args.set))
        return loader.params
    cfg = run.load_config() or LoadConfig.LoadParameters(DEFAULT_CONFIG_ID).params
    for key, value in _overrides(args.set).items():
        cfg.set(key, value)
    return cfg


def execute(args: argparse.Namespace) -> Optional[str]:
    """
    Runs a parsed command and returns the text to print (if any).
    """
    run = RunDirectory(args.run_dir)
    cfg = resolve_config(args, run)
    setup_logging(args.log_level, run.file(LOG_FILE))
    experiment = Experiment(cfg, run, force=args.force)
    run.record_command(args.command, {key: value for key, value in sorted(vars(args).items()) if key != "command"})
    logger.info("Command %s in %s (configuration %s)", args.command, run.path, cfg.get("name"))
    if args.command == "gen-data":
        experiment.generate_corpus()
    elif args.command == "train":
        experiment.train_all(reuse=False)
    elif args.command == "adapt":
        for seed in cfg.get("seeds"):
            experiment.adapt(seed)
    elif args.command == "eval":
        return experiment.evaluate().format()
    elif args.command == "grid":
        return experiment.run_grid().format()
    elif args.command == "sweep":
        return experiment.run_hours_sweep(args.language or cfg.get("source_language")).format()
    elif args.command == "report":
        return experiment.report()
    return None


def error_report(error: BaseException, command: Optional[str]) -> dict:
    message = error.args[0] if isinstance(error, KeyError) and error.args else str(error)
    report = {"error": type(error).__name__, "message": message, "command": command}
    if isinstance(error, CellError):
        report["cell"] = error.cell
        report["cause"] = type(error.__cause__).__name__ if error.__cause__ is not None else None
    return report


def exit_code(error: BaseException) -> int:
    usage = (
        UsageError,
        Exceptions.ConfigError,
        ConfigExceptions.IDNotAvailableError,
        ConfigExceptions.MissingFieldError,
        ConfigExceptions.UnknownFieldError,
    )
    return EXIT_USAGE if isinstance(error, usage) else EXIT_RUNTIME


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the command line interface.

    Returns
    -------
    int
        0 on success, 2 for usage and configuration errors, 1 for every other error; errors are reported as JSON
        object on stderr.
    """
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        output = execute(args)
    except Exception as error:
        logger.debug("Command failed", exc_info=True)
        print(json.dumps(error_report(error, command), sort_keys=True), file=sys.stderr)
        return exit_code(error)
    if output:
        print(output)
    return 0


def run() -> None:
    sys.exit(main())
