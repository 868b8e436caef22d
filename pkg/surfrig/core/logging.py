"""
Logging configuration for surfrig.
"""

import logging
import sys
import json
from typing import Dict, Any, Optional
from datetime import datetime, timezone
from surfrig.config import settings


_EXTRA_FIELDS = (
    "command",
    "iteration",
    "loss",
    "terms",
    "step_sizes",
    "duration",
    "face",
    "neighbor",
    "suite",
    "passed",
    "failed",
    "event_type",
)


class JSONFormatter(logging.Formatter):
    """
    JSON formatter for structured logging.
    """

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON."""
        log_entry = {
            "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }

        for field in _EXTRA_FIELDS:
            if hasattr(record, field):
                log_entry[field] = getattr(record, field)

        log_entry["service"] = settings.app_name
        log_entry["version"] = settings.app_version

        if record.exc_info:
            log_entry["exception"] = {
                "type": record.exc_info[0].__name__,
                "message": str(record.exc_info[1]),
                "traceback": self.formatException(record.exc_info),
            }

        return json.dumps(log_entry, default=str)


def setup_logging(stream=None) -> None:
    """
    Configure logging for the application.

    Args:
        stream: Output stream for the console handler, stderr by default so
            that command reports on stdout stay machine-readable.
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, settings.log_level.upper()))

    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(stream or sys.stderr)

    if settings.debug:
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        console_handler.setLevel(logging.DEBUG)
    else:
        formatter = JSONFormatter()
        console_handler.setLevel(getattr(logging, settings.log_level.upper()))

    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    configure_loggers()


def configure_loggers() -> None:
    """
    Configure specific loggers for different components.
    """
    loggers_config = {
        "surfrig": settings.log_level.upper(),
        "surfrig.fit": "INFO" if not settings.debug else "DEBUG",
        "PIL": "WARNING",
        "opentelemetry": "WARNING",
    }

    for logger_name, level in loggers_config.items():
        logger = logging.getLogger(logger_name)
        logger.setLevel(getattr(logging, level))


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance with the given name.

    Args:
        name: Logger name, typically __name__

    Returns:
        Configured logger instance
    """
    return logging.getLogger(name)


class FitLogger:
    """
    Utility class for logging optimizer iterations.
    """

    def __init__(self, logger: logging.Logger):
        self.logger = logger

    def log_iteration(
        self,
        iteration: int,
        loss: float,
        terms: Dict[str, float],
        step_sizes: Dict[str, float],
        accepted: bool,
    ) -> None:
        """
        Log one optimizer iteration.

        Args:
            iteration: Iteration index (1-based)
            loss: Total loss after the iteration
            terms: Per-term breakdown
            step_sizes: Effective per-group step sizes
            accepted: Whether the line search accepted a step
        """
        extra = {
            "event_type": "fit_iteration",
            "iteration": iteration,
            "loss": loss,
            "terms": terms,
            "step_sizes": step_sizes,
        }
        level = logging.DEBUG if accepted else logging.INFO
        self.logger.log(
            level,
            f"iteration {iteration}: loss={loss:.6g}{'' if accepted else ' (no descent step)'}",
            extra=extra,
        )


class DiagnosticsLogger:
    """
    Utility class for logging numerical events.
    """

    def __init__(self, logger: logging.Logger):
        self.logger = logger

    def log_rejected_face(self, face: int, reason: str) -> None:
        """Log a triangle rejected by geometry validation."""
        self.logger.warning(
            f"Face {face} rejected: {reason}",
            extra={"event_type": "rejected_face", "face": face},
        )

    def log_divergence(self, iteration: int, terms: Dict[str, Any]) -> None:
        """Log a non-finite loss."""
        self.logger.error(
            f"Loss diverged at iteration {iteration}",
            extra={"event_type": "diverged", "iteration": iteration, "terms": terms},
        )

    def log_suite(self, suite: str, passed: int, failed: int, detail: Optional[str] = None) -> None:
        """Log the outcome of one self-test suite."""
        level = logging.INFO if failed == 0 else logging.ERROR
        message = f"Suite {suite}: {passed} passed, {failed} failed"
        if detail:
            message = f"{message} ({detail})"
        self.logger.log(
            level,
            message,
            extra={"event_type": "selftest_suite", "suite": suite, "passed": passed, "failed": failed},
        )
