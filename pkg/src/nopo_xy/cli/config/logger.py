import logging
import os

from rich.console import Console
from rich.logging import RichHandler

# Library modules log under "nopo_xy.<module>"; handlers hang off the package logger
LOGGER = logging.getLogger("nopo_xy")

VERBOSITY_LEVELS = {1: logging.INFO, 2: logging.DEBUG}


def configure_logging(verbosity: int = 0) -> logging.Logger:
    """Attach the stderr and optional file handlers once; later calls only adjust levels."""
    level_name = os.getenv("NOPO_XY_LOG_LEVEL", "WARNING").upper()
    level = logging.getLevelName(level_name)
    if not isinstance(level, int):
        level = logging.WARNING
    if verbosity:
        level = min(level, VERBOSITY_LEVELS[min(verbosity, 2)])
    LOGGER.setLevel(logging.DEBUG)

    # Prevent duplicate handlers if configured again in the same process
    if not LOGGER.handlers:
        stderr_handler = RichHandler(console=Console(stderr=True), show_path=False)
        LOGGER.addHandler(stderr_handler)

        log_file = os.getenv("NOPO_XY_LOG_FILE")
        if log_file:
            # File handler - overwrites log file each run
            file_handler = logging.FileHandler(log_file, mode="w")
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(
                logging.Formatter("%(asctime)s - %(levelname)s - %(name)s - %(message)s")
            )
            LOGGER.addHandler(file_handler)

    for handler in LOGGER.handlers:
        if isinstance(handler, RichHandler):
            handler.setLevel(level)
    return LOGGER
