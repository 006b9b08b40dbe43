import contextlib
import contextvars
import logging
import sys
from typing import Dict, Iterator, Optional

_CONFIGURED_LOGGERS: Dict[str, logging.Logger] = {}

_RUN_TAG: contextvars.ContextVar[str] = contextvars.ContextVar("uris_run_tag", default="-")

LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
}


class RunContextFilter(logging.Filter):
    """Помечает каждую запись тегом текущего прогона (алгоритм@дайджест)"""

    def filter(self, record):
        record.run = _RUN_TAG.get()
        return True


@contextlib.contextmanager
def run_context(algorithm: str, digest: str) -> Iterator[str]:
    """
    Устанавливает тег прогона для всех логов внутри блока

    Args:
        algorithm: Имя алгоритма
        digest: SHA-256 дайджест сценария (используются первые 8 символов)
    """
    tag = f"{algorithm}@{digest[:8]}"
    token = _RUN_TAG.set(tag)
    try:
        yield tag
    finally:
        _RUN_TAG.reset(token)


def _default_level() -> int:
    from app.core.config import get_settings

    return LEVELS.get(get_settings().LOG_LEVEL.upper(), logging.INFO)


def setup_logger(name: str, level: Optional[int] = None) -> logging.Logger:
    if name in _CONFIGURED_LOGGERS:
        return _CONFIGURED_LOGGERS[name]

    if level is None:
        level = _default_level()

    logger = logging.getLogger(name)

    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    logger.setLevel(level)
    logger.propagate = False

    handler = logging.StreamHandler(sys.stdout)
    handler.setLevel(level)

    formatter = logging.Formatter(
        "[%(asctime)s] [%(levelname)s] [%(name)s] [%(run)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )
    handler.setFormatter(formatter)
    handler.addFilter(RunContextFilter())

    logger.addHandler(handler)

    _CONFIGURED_LOGGERS[name] = logger

    return logger


def set_level(level: int) -> None:
    """Меняет уровень всех уже созданных логгеров приложения"""
    for logger in _CONFIGURED_LOGGERS.values():
        logger.setLevel(level)
        for handler in logger.handlers:
            handler.setLevel(level)


def configure_root_logger(level: Optional[int] = None):
    root_logger = logging.getLogger()

    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    if level is None:
        level = _default_level()
    root_logger.setLevel(level)

    logging.getLogger("celery").setLevel(logging.WARNING)
    logging.getLogger("kombu").setLevel(logging.WARNING)

    app_logger = setup_logger("app", level)

    return app_logger
