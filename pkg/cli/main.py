"""
Main module for the command-line interface.

    python -m cli.main generate --count 8 --out data/
    python -m cli.main train --data data/ --out desk.ckpt --steps 2000
    python -m cli.main eval --model desk.ckpt --data data/ --report report.json
    python -m cli.main infer --model desk.ckpt --in scan.lpc --out prims.json
    python -m cli.main gradcheck --seeds 5

Exit codes: 0 ok, 1 failed check, 2 usage / configuration / I/O, 3 numerical failure.
"""
import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from assignment.errors import AssignmentError
from cli.commands import (EXIT_NUMERIC, EXIT_USAGE, UsageError, cmd_eval, cmd_generate, cmd_gradcheck, cmd_infer,
                          cmd_robustness, cmd_train)
from inference.errors import InferenceError
from logs.project_log import main_logger, set_console_level
from network.errors import CheckpointError, NonFiniteLoss
from scene.errors import SceneError
from settings import settings

_USAGE_ERRORS = (UsageError, ValidationError, OSError, SceneError, CheckpointError, InferenceError, ValueError)
_NUMERIC_ERRORS = (NonFiniteLoss, AssignmentError, FloatingPointError)


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="run config JSON; missing keys take the preset's values")
    parser.add_argument("--preset", choices=("desk", "full"), default="desk")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unico", description="Structured shape completion with primitives.")
    parser.add_argument("--log-level", default=None, help="console log level (default from UNICO_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    generate = sub.add_parser("generate", help="write synthetic labeled shapes")
    _common(generate)
    generate.add_argument("--count", type=int, required=True)
    generate.add_argument("--out", required=True)
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--spec", help="ShapeSpec JSON overriding the config's data.spec")
    generate.add_argument("--random-pose", action="store_true")
    generate.set_defaults(handler=cmd_generate)

    train = sub.add_parser("train", help="train a model")
    _common(train)
    train.add_argument("--data", required=True)
    train.add_argument("--out", required=True, help="checkpoint path")
    train.add_argument("--steps", type=int, default=None)
    train.add_argument("--resume", default=None, help="checkpoint to continue from")
    train.add_argument("--log", default=None, help="JSON-lines step log (default: <out>.jsonl)")
    train.add_argument("--log-every", type=int, default=50)
    train.add_argument("--static-targets", action="store_true",
                       help="induce targets once per shape instead of every step")
    train.set_defaults(handler=cmd_train)

    evaluate = sub.add_parser("eval", help="evaluate predictions against ground truth")
    _common(evaluate)
    evaluate.add_argument("--model", default=None)
    evaluate.add_argument("--data", required=True)
    evaluate.add_argument("--report", required=True)
    evaluate.add_argument("--threshold", type=float, default=None)
    evaluate.add_argument("--thresholds", type=float, nargs="+", default=None, help="one report per threshold")
    evaluate.add_argument("--oracle", action="store_true", help="evaluate the ground truth against itself")
    evaluate.add_argument("--baseline", choices=("ransac",), default=None)
    evaluate.add_argument("--source", choices=("analytic", "fitted"), default=None)
    evaluate.add_argument("--project", action="store_true")
    evaluate.set_defaults(handler=cmd_eval)

    infer = sub.add_parser("infer", help="export primitives for one partial scan")
    _common(infer)
    infer.add_argument("--model", required=True)
    infer.add_argument("--in", dest="input", required=True)
    infer.add_argument("--out", required=True)
    infer.add_argument("--threshold", type=float, default=None)
    infer.add_argument("--project", action="store_true")
    infer.add_argument("--source", choices=("analytic", "fitted"), default=None)
    infer.add_argument("--no-points", action="store_true", help="omit dense points from the export")
    infer.set_defaults(handler=cmd_infer)

    check = sub.add_parser("gradcheck", help="finite-difference check of all backward passes")
    _common(check)
    check.add_argument("--tol", type=float, default=1e-4)
    check.add_argument("--seeds", type=int, default=5)
    check.add_argument("--samples", type=int, default=4, help="entries checked per tensor")
    check.add_argument("--corrupt", default=None, help="layer whose backward is scaled (negative control)")
    check.add_argument("--report", default=None)
    check.set_defaults(handler=cmd_gradcheck)

    robustness = sub.add_parser("robustness", help="incompleteness and noise sweeps")
    _common(robustness)
    robustness.add_argument("--model", default=None)
    robustness.add_argument("--data", required=True)
    robustness.add_argument("--out", required=True, help="report directory")
    robustness.add_argument("--ratios", type=float, nargs="+", default=None)
    robustness.add_argument("--sigmas", type=float, nargs="+", default=None)
    robustness.add_argument("--baseline", choices=("ransac",), default=None)
    robustness.add_argument("--threshold", type=float, default=None)
    robustness.set_defaults(handler=cmd_robustness)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parses ``argv`` and runs the chosen command.

    Returns:
        int: Process exit code.
    """
    args = build_parser().parse_args(argv)
    set_console_level(args.log_level or settings.log_level)
    main_logger.info("Starting %s...", args.command)
    try:
        return args.handler(args)
    except _NUMERIC_ERRORS:
        main_logger.error("Numerical failure in %s", args.command, exc_info=True)
        return EXIT_NUMERIC
    except _USAGE_ERRORS:
        main_logger.error("%s failed", args.command, exc_info=True)
        return EXIT_USAGE
    finally:
        main_logger.info("%s finished.", args.command)


if __name__ == '__main__':
    sys.exit(main())
