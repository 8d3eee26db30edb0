"""
rrlab entry point
Configures structured logging, then hands the command line to the experiment CLI

Purpose: `python main.py <subcommand> ...` and the scripts/rrlab wrapper
"""

import logging
import sys

import structlog

from config.settings import get_settings

settings = get_settings()

logging.basicConfig(
    format="%(message)s",
    stream=sys.stderr,
    level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
)

# Configure structured logging
structlog.configure(
    processors=[
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
        structlog.dev.ConsoleRenderer() if settings.LOG_FORMAT == "console"
        else structlog.processors.JSONRenderer(),
    ],
    context_class=dict,
    logger_factory=structlog.stdlib.LoggerFactory(),
    wrapper_class=structlog.stdlib.BoundLogger,
    cache_logger_on_first_use=True,
)

from experiments.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
