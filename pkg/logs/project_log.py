"""Module for console and step logging"""
import json
import logging

log_formatter = logging.Formatter('%(asctime)s <%(module)s> %(levelname)s '
                                  '%(funcName)s(%(lineno)d) %(message)s')

main_logger = logging.getLogger(__name__)
main_logger.setLevel(logging.DEBUG)

consoleHandler = logging.StreamHandler()
consoleHandler.setFormatter(log_formatter)
consoleHandler.setLevel(logging.INFO)
main_logger.addHandler(consoleHandler)


class JsonLinesFormatter(logging.Formatter):
    """Renders the record's ``payload`` dict as a single JSON line."""

    def format(self, record: logging.LogRecord) -> str:
        payload = getattr(record, "payload", None)
        if payload is None:
            payload = {"message": record.getMessage()}
        return json.dumps(payload, sort_keys=True)


step_logger = logging.getLogger(__name__ + ".steps")
step_logger.setLevel(logging.INFO)
step_logger.propagate = False


def set_console_level(level: str):
    """Adjusts the console handler threshold (e.g. from ``UNICO_LOG_LEVEL``)."""
    consoleHandler.setLevel(level.upper())


def attach_step_log(path: str) -> logging.Handler:
    """
    Sends training step records to ``path`` as JSON lines.

    Args:
        path (str): Target file, truncated on attach.

    Returns:
        logging.Handler: The handler, so the caller can detach it.
    """
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(JsonLinesFormatter())
    step_logger.addHandler(handler)
    return handler


def detach_step_log(handler: logging.Handler):
    step_logger.removeHandler(handler)
    handler.close()


def log_step(payload: dict):
    """Emits one JSON-lines step record."""
    step_logger.info("step", extra={"payload": payload})
