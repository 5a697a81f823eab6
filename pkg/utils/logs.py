#!/usr/bin/env python3
"""
Logging Setup
=============

One place that configures the root logger for the command-line tools.
The level comes from the explicit argument, then the IGS_LOG environment
variable, then the settings file.
"""

import logging
import os
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Union

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}

logger = logging.getLogger("ion_grover")


def resolve_level(level: Optional[Union[str, int]] = None) -> int:
    """Translate a level name (or the IGS_LOG variable) into a logging level."""
    if isinstance(level, int):
        return level
    name = level or os.environ.get("IGS_LOG") or "warning"
    return _LEVELS.get(name.strip().lower(), logging.WARNING)


def setup_logging(
    level: Optional[Union[str, int]] = None,
    log_dir: Optional[Union[str, Path]] = None,
    fmt: str = LOG_FORMAT,
) -> Optional[Path]:
    """Configure stderr logging and, when log_dir is given, a timestamped file.

    Returns the log file path, if one was created.
    """
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    log_file = None
    if log_dir:
        directory = Path(log_dir)
        directory.mkdir(parents=True, exist_ok=True)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        log_file = directory / f"ion_grover_{timestamp}.log"
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(level=resolve_level(level), format=fmt, handlers=handlers, force=True)
    logger.debug("logging configured (file=%s)", log_file)
    return log_file
