import logging
import os
import sys
from datetime import datetime
from typing import Optional
from colorlog import ColoredFormatter


def setup_logger(name: str = 'epochspec', log_level: Optional[str] = None) -> logging.Logger:
    """Setup a colored stderr logger plus an optional daily file handler"""

    level_name = (log_level or os.getenv('EPOCHSPEC_LOG_LEVEL', 'INFO')).upper()
    log_dir = os.getenv('EPOCHSPEC_LOG_DIR', 'logs')

    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, level_name, logging.INFO))
    logger.propagate = False

    # Remove existing handlers
    for handler in list(logger.handlers):
        handler.close()
    logger.handlers = []

    # Console handler with colors; stderr keeps stdout free for JSON documents
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(logging.DEBUG)

    console_format = ColoredFormatter(
        "%(log_color)s%(asctime)s - %(name)s - %(levelname)s - %(message)s%(reset)s",
        datefmt='%Y-%m-%d %H:%M:%S',
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'red,bg_white',
        }
    )
    console_handler.setFormatter(console_format)
    logger.addHandler(console_handler)

    # File handler, disabled with EPOCHSPEC_LOG_DIR=""
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        log_filename = os.path.join(log_dir, f'{name}_{datetime.now().strftime("%Y%m%d")}.log')
        file_handler = logging.FileHandler(log_filename)
        file_handler.setLevel(logging.DEBUG)

        file_format = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        file_handler.setFormatter(file_format)
        logger.addHandler(file_handler)

    return logger


def set_level(log_level: str) -> None:
    """Change the level of every logger created through setup_logger"""
    level = getattr(logging, log_level.upper(), logging.INFO)
    for name, existing in logging.Logger.manager.loggerDict.items():
        if isinstance(existing, logging.Logger) and any(
            isinstance(h.formatter, ColoredFormatter) for h in existing.handlers
        ):
            existing.setLevel(level)
