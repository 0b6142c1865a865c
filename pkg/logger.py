#!/usr/bin/env python3
"""
decoscatter - Centralized Logging System
Single process-wide logger for the simulation modules and the experiment driver.
"""

import logging
import sys
from typing import Optional

LOGGER_NAME = 'decoscatter'


class SimulationLogger:
    """Centralized logging system for decoscatter."""

    _instance: Optional['SimulationLogger'] = None
    _initialized = False

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if not self._initialized:
            self._initialized = True
            self._setup_logging()

    def _setup_logging(self):
        """Setup logging configuration."""
        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(logging.DEBUG)

        # Prevent duplicate handlers
        if self.logger.handlers:
            return

        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%H:%M:%S'
        )

        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setLevel(logging.INFO)
        console_handler.setFormatter(formatter)
        self.logger.addHandler(console_handler)

        # File handler (optional)
        try:
            file_handler = logging.FileHandler('decoscatter.log', mode='a')
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(formatter)
            self.logger.addHandler(file_handler)
        except (OSError, PermissionError):
            # Console only
            pass

    def set_console_level(self, level: int):
        """Change the console verbosity (file handler keeps DEBUG)."""
        for handler in self.logger.handlers:
            if not isinstance(handler, logging.FileHandler):
                handler.setLevel(level)

    def info(self, message: str):
        self.logger.info(message)

    def debug(self, message: str):
        self.logger.debug(message)

    def warning(self, message: str):
        self.logger.warning(message)

    def error(self, message: str):
        self.logger.error(message)

    def critical(self, message: str):
        self.logger.critical(message)


# Global instance
sim_logger = SimulationLogger()


# Convenience functions
def log_info(message: str):
    """Log info message."""
    sim_logger.info(message)


def log_debug(message: str):
    """Log debug message."""
    sim_logger.debug(message)


def log_warning(message: str):
    """Log warning message."""
    sim_logger.warning(message)


def log_error(message: str):
    """Log error message."""
    sim_logger.error(message)


def log_critical(message: str):
    """Log critical message."""
    sim_logger.critical(message)
