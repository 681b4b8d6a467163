import logging
import os
import sys

LOG_LEVEL_ENV = "DEEPSIGHT_LOG_LEVEL"


class LoggerFactory:
    @staticmethod
    def create_logger(name=None, level=logging.INFO):
        """create a logger

        Args:
            name (str): name of the logger
            level: level of logger

        Raises:
            ValueError is name is None
        """

        if name is None:
            raise ValueError("name for logger cannot be None")

        formatter = logging.Formatter(
            "[%(asctime)s] [%(levelname)s] "
            "[%(filename)s:%(lineno)d:%(funcName)s] %(message)s")

        logger_ = logging.getLogger(name)
        logger_.setLevel(level)
        logger_.propagate = False
        # stdout belongs to the command line tables
        ch = logging.StreamHandler(stream=sys.stderr)
        ch.setLevel(level)
        ch.setFormatter(formatter)
        logger_.addHandler(ch)
        return logger_


def _level_from_env(default=logging.INFO):
    name = os.environ.get(LOG_LEVEL_ENV, None)
    if name is None:
        return default
    level = logging.getLevelName(name.upper())
    if not isinstance(level, int):
        return default
    return level


logger = LoggerFactory.create_logger(name="DeepSight", level=_level_from_env())


def set_log_level(level):
    """Change the level of the package logger and its handlers."""
    logger.setLevel(level)
    for handler in logger.handlers:
        handler.setLevel(level)
