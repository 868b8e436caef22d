"""
Command-line entry point.

    surfrig deform|render|interp-demo|fit|selftest --config <path>
            [--out <dir>] [--seed <u64>] [--threads <n>]
"""

import argparse
import sys
import time
from pathlib import Path
from typing import Optional, Sequence, TextIO

from surfrig.commands import deform, fit, interp_demo, render, selftest
from surfrig.commands.common import CommandContext
from surfrig.config import settings
from surfrig.core.errors import SurfrigError
from surfrig.core.logging import get_logger, setup_logging
from surfrig.core.metrics import write_metrics
from surfrig.core.tracing import setup_tracing
from surfrig.schemas.errors import ErrorReport
from surfrig.schemas.run_config import RunConfig, load_run_config

logger = get_logger(__name__)

INTERNAL_ERROR_EXIT_CODE = 4

COMMANDS = {module.NAME: module for module in (deform, render, interp_demo, fit, selftest)}
CONFIG_OPTIONAL = {interp_demo.NAME, selftest.NAME}


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def _threads(value: str) -> int:
    threads = int(value)
    if threads < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return threads


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surfrig", description="Mesh-rigged 2D Gaussian surfels")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.app_version}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, module in COMMANDS.items():
        sub = subparsers.add_parser(name, help=module.HELP)
        sub.add_argument("--config", type=Path, required=name not in CONFIG_OPTIONAL, help="JSON run config")
        sub.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
        sub.add_argument("--seed", type=_seed, default=None, help="random seed (overrides the config)")
        sub.add_argument("--threads", type=_threads, default=None, help="worker threads (SURFRIG_THREADS wins)")
        if name == selftest.NAME:
            sub.add_argument("--mutate", choices=sorted(selftest.MUTATIONS), default=None, help=argparse.SUPPRESS)
    return parser


def _report(error: SurfrigError, stderr: TextIO) -> int:
    report = ErrorReport(error=error.kind, detail=error.detail, exit_code=error.exit_code, context=error.context)
    stderr.write(report.model_dump_json() + "\n")
    stderr.flush()
    return error.exit_code


def main(argv: Optional[Sequence[str]] = None, stdout: TextIO = None, stderr: TextIO = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)

    setup_logging(stderr)
    if settings.tracing_enabled:
        setup_tracing()

    started = time.perf_counter()
    module = COMMANDS[args.command]
    try:
        config: Optional[RunConfig] = load_run_config(args.config) if args.config is not None else None
        seed = args.seed if args.seed is not None else (config.seed if config is not None else settings.default_seed)
        out_dir = args.out or (config.output_dir if config is not None else Path("out"))
        ctx = CommandContext(
            out_dir=Path(out_dir),
            seed=seed,
            threads=settings.resolve_threads(args.threads),
            mutate=getattr(args, "mutate", None),
            stdout=stdout,
        )
        logger.info(f"Running {args.command}", extra={"command": args.command})
        code = module.run(config if config is not None else RunConfig(), ctx)
    except SurfrigError as error:
        logger.error(f"{args.command} failed: {error.detail}", extra={"command": args.command})
        return _report(error, stderr)
    except Exception as error:
        logger.exception(f"{args.command} crashed", extra={"command": args.command})
        report = ErrorReport(
            error="InternalError",
            detail=f"{type(error).__name__}: {error}",
            exit_code=INTERNAL_ERROR_EXIT_CODE,
            context={"command": args.command},
        )
        stderr.write(report.model_dump_json() + "\n")
        stderr.flush()
        return INTERNAL_ERROR_EXIT_CODE

    write_metrics(ctx.out_dir)
    logger.info(
        f"{args.command} finished with exit code {code}",
        extra={"command": args.command, "duration": round(time.perf_counter() - started, 4)},
    )
    return code


if __name__ == "__main__":
    sys.exit(main())
