import logging
import os
import sys

import structlog
from structlog.processors import JSONRenderer

LOGGER_NAME = "SentiBenchLogger"

sentibench_logger: structlog.stdlib.BoundLogger = structlog.get_logger(LOGGER_NAME)
logging.basicConfig(format="[%(levelname)s] %(asctime)s - %(message)s function='%(funcName)s'", stream=sys.stderr, level=logging.INFO)
logging.getLogger(LOGGER_NAME).setLevel(os.environ.get("SENTIBENCH_LOG_LEVEL", "INFO").upper())
structlog.configure(
    processors=[
        structlog.contextvars.merge_contextvars,
        structlog.processors.add_log_level,
        JSONRenderer(sort_keys=True),
    ],
    logger_factory=structlog.stdlib.LoggerFactory(),
)

__all__ = ["LOGGER_NAME", "sentibench_logger"]
