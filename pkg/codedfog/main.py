import argparse
import json
import logging
import sys
from typing import List, Optional

import structlog
from pydantic import ValidationError

from codedfog import __version__
from codedfog.commands import matmul, mbc, mlc, unified
from codedfog.config import settings
from codedfog.core.errors import CodedFogError

# ============================================================
# 🔧 Structured Logging Setup
# ============================================================
def configure_logging(level: Optional[str] = None, log_format: Optional[str] = None) -> None:
    """JSON lines on stderr by default; LOG_FORMAT=console for humans. stdout carries results only."""
    level = (level or settings.LOG_LEVEL).upper()
    renderer = (
        structlog.dev.ConsoleRenderer()
        if (log_format or settings.LOG_FORMAT) == "console"
        else structlog.processors.JSONRenderer()
    )
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, level, logging.INFO)),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


logger = structlog.get_logger()

# ============================================================
# 🧩 Commands
# ============================================================
COMMAND_MODULES = (mbc, mlc, unified, matmul)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codedfog",
        description="Coding schemes for fog computing: bandwidth, latency and their tradeoff",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="overrides LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMAND_MODULES:
        module.register(subparsers)
    return parser


# ============================================================
# ⚠️ Global Exception Handler
# ============================================================
def _print_error(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse, dispatch and map failures to exit codes.

    Returns:
        0 on success, 1 when an internal check fails or something unexpected breaks,
        2 on invalid arguments or infeasible parameters
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    logger.info("command_started", command=args.command, version=__version__, environment=settings.ENVIRONMENT)

    try:
        code = args.handler(args)
    except ValidationError as exc:
        problems = [
            {"field": ".".join(str(part) for part in error["loc"]), "message": error["msg"]}
            for error in exc.errors()
        ]
        logger.error("invalid_arguments", command=args.command, problems=problems)
        _print_error({"success": False, "error": "invalid-argument", "message": "invalid arguments", "details": problems})
        return 2
    except CodedFogError as exc:
        logger.error("command_failed", command=args.command, error=exc.code, message=exc.message)
        _print_error(exc.to_dict())
        return 2
    except Exception as exc:
        logger.error("unhandled_exception", command=args.command, error=str(exc), exc_info=True)
        return 1

    logger.info("command_finished", command=args.command, exit_code=code)
    return code


if __name__ == "__main__":
    sys.exit(main())
