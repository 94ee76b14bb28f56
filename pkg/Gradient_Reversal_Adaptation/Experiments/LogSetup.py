from typing import Final, Optional

import logging
import sys

LOG_FORMAT: Final[str] = "%(asctime)s %(levelname)s %(name)s: %(message)s"
PACKAGE_LOGGER: Final[str] = "Gradient_Reversal_Adaptation"


def setup_logging(level="INFO", log_file: Optional[str] = None) -> logging.Logger:
    """
    Configures the logger of the package: messages go to stderr and, if given, are appended to the log file.

    Calling the function again replaces the handlers of the previous call.

    Parameters
    ----------
    level
        Name or number of the lowest level to emit.
    log_file: Optional[str]
        File to append the messages to (run.log of a run directory).

    Returns
    -------
    logging.Logger
        Logger of the package.
    """
    logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        handlers.append(logging.FileHandler(log_file))
    formatter = logging.Formatter(LOG_FORMAT)
    for handler in handlers:
        handler.setFormatter(formatter)
        logger.addHandler(handler)
    logger.setLevel(level.upper() if isinstance(level, str) else level)
    logger.propagate = False
    return logger
