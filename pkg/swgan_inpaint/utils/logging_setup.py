"""
Root logger configuration shared by the CLI and the training wrapper.
"""

import logging
from typing import Optional

from swgan_inpaint.utils.config import LogSettings

FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> LogSettings:
    """Setup structured logging.

    Explicit arguments win over LOG_LEVEL / LOG_FILE from the environment.
    """
    settings = LogSettings.from_env()
    if level:
        settings = LogSettings(log_level=level, log_file=settings.log_file)
    if log_file:
        settings.log_file = log_file

    formatter = logging.Formatter(FORMAT)

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, settings.log_level))
    # repeated calls (tests, nested commands) must not stack handlers
    for handler in list(root_logger.handlers):
        if getattr(handler, "_swgan", False):
            root_logger.removeHandler(handler)
            handler.close()

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    console_handler._swgan = True
    root_logger.addHandler(console_handler)

    if settings.log_file:
        file_handler = logging.FileHandler(settings.log_file)
        file_handler.setFormatter(formatter)
        file_handler._swgan = True
        root_logger.addHandler(file_handler)
    return settings
