"""
Logger utility for esmcheck with rotation and colored console output.

The configured logger is the root of the ``esm`` hierarchy; library modules
log through ``logging.getLogger("esm.<area>")`` and propagate into it.
"""

import logging
import logging.handlers
import os
import sys
from typing import Any, Dict

import colorlog


ROOT_LOGGER = "esm"


def parse_size(size: Any) -> int:
    """
    Convert a size setting such as "10MB" or "512KB" to bytes.

    Args:
        size: Integer byte count or string with a KB/MB suffix

    Returns:
        Size in bytes
    """
    text = str(size).strip().upper()
    if text.endswith("MB"):
        return int(text[:-2]) * 1024 * 1024
    if text.endswith("KB"):
        return int(text[:-2]) * 1024
    return int(text)


class EsmLogger:
    """Logger class with file rotation and colored console output."""

    def __init__(self, name: str, config: Dict[str, Any]):
        """
        Initialize the logger.

        Args:
            name: Logger name (normally the ``esm`` root)
            config: Configuration dictionary containing logging settings
        """
        self.name = name
        self.config = config
        self.logger = logging.getLogger(name)
        level = config.get("general", {}).get("log_level", "INFO")
        self.logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))
        self.logger.propagate = False

        # Clear any existing handlers
        for handler in list(self.logger.handlers):
            handler.close()
        self.logger.handlers.clear()

        logging_config = config.get("logging", {})
        if logging_config.get("log_file"):
            self._setup_file_handler(logging_config)
        if logging_config.get("console", True):
            self._setup_console_handler()

    def _setup_file_handler(self, logging_config: Dict[str, Any]) -> None:
        """Setup file handler with rotation."""
        log_file = logging_config["log_file"]

        log_dir = os.path.dirname(log_file)
        if log_dir and not os.path.exists(log_dir):
            os.makedirs(log_dir, exist_ok=True)

        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=parse_size(logging_config.get("max_log_size", "10MB")),
            backupCount=int(logging_config.get("backup_count", 5)),
            encoding="utf-8",
        )
        file_handler.setFormatter(logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        ))
        self.logger.addHandler(file_handler)

    def _setup_console_handler(self) -> None:
        """Setup colored console handler on stderr (stdout carries reports)."""
        console_handler = colorlog.StreamHandler(sys.stderr)
        console_handler.setFormatter(colorlog.ColoredFormatter(
            "%(log_color)s%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%H:%M:%S",
            log_colors={
                "DEBUG": "cyan",
                "INFO": "green",
                "WARNING": "yellow",
                "ERROR": "red",
                "CRITICAL": "red,bg_white",
            },
        ))
        self.logger.addHandler(console_handler)

    def debug(self, message: str) -> None:
        """Log debug message."""
        self.logger.debug(message)

    def info(self, message: str) -> None:
        """Log info message."""
        self.logger.info(message)

    def warning(self, message: str) -> None:
        """Log warning message."""
        self.logger.warning(message)

    def error(self, message: str, exc_info: bool = False) -> None:
        """Log error message."""
        self.logger.error(message, exc_info=exc_info)

    def critical(self, message: str, exc_info: bool = False) -> None:
        """Log critical message."""
        self.logger.critical(message, exc_info=exc_info)


def get_logger(name: str, config: Dict[str, Any]) -> EsmLogger:
    """
    Get a logger instance.

    Args:
        name: Logger name
        config: Configuration dictionary

    Returns:
        EsmLogger instance
    """
    return EsmLogger(name, config)
