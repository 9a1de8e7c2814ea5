# kcell_lab/core/logging.py
import json
import logging
import logging.handlers
import os
import sys
import traceback
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Any

from kcell_lab.core.config import get_settings

LEVEL_COLOURS = {
    logging.DEBUG: "\x1b[38;21m",
    logging.INFO: "\x1b[34m",
    logging.WARNING: "\x1b[33m",
    logging.ERROR: "\x1b[31m",
    logging.CRITICAL: "\x1b[31;1m",
}
RESET = "\x1b[0m"


def _short_name(name: str) -> str:
    return name[len("kcell_lab."):] if name.startswith("kcell_lab.") else name


class CustomFormatter(logging.Formatter):
    """Coloured console lines; pool workers are tagged with their process name"""

    def __init__(self, colour: bool = True):
        super().__init__(datefmt='%H:%M:%S')
        self.colour = colour

    def format(self, record):
        where = _short_name(record.name)
        if record.processName != "MainProcess":
            where = f"{where}@{record.processName}"
        line = f"[{self.formatTime(record, self.datefmt)}] {where} - {record.levelname} - {record.getMessage()}"
        if record.exc_info and not record.exc_text:
            record.exc_text = self.formatException(record.exc_info)
        if record.exc_text:
            line = f"{line}\n{record.exc_text}"
        if not self.colour:
            return line
        return LEVEL_COLOURS.get(record.levelno, "") + line + RESET


class JSONFormatter(logging.Formatter):
    """One JSON object per record; structured fields go under 'extra'"""

    def format(self, record):
        log_data = {
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'level': record.levelname,
            'logger': _short_name(record.name),
            'message': record.getMessage(),
            'process': record.processName,
            'pid': record.process,
            'where': f"{record.module}.{record.funcName}:{record.lineno}",
        }
        extra = getattr(record, 'extra_data', None)
        if extra is not None:
            log_data['extra'] = extra
            if 'campaign_id' in extra:
                log_data['campaign_id'] = extra['campaign_id']
        if record.exc_info:
            log_data['exception'] = traceback.format_exception(*record.exc_info)
        return json.dumps(log_data, default=str)


class LoggerManager:
    """Per-name loggers: console on stderr plus rotating JSON files under LOG_DIR"""

    _loggers = {}

    @classmethod
    def get_logger(cls, name: str) -> logging.Logger:
        """Get or create a logger with the specified name"""

        if name in cls._loggers:
            return cls._loggers[name]

        settings = get_settings()
        logger = logging.getLogger(name)
        logger.setLevel(logging.DEBUG)
        logger.propagate = False

        # stderr keeps stdout free for the CLI summary
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(settings.LOG_LEVEL)
        console_handler.setFormatter(CustomFormatter(colour=sys.stderr.isatty() and "NO_COLOR" not in os.environ))
        logger.addHandler(console_handler)

        try:
            log_dir = Path(settings.LOG_DIR)
            log_dir.mkdir(parents=True, exist_ok=True)
            logger.addHandler(cls._json_file(log_dir / settings.LOG_FILE, logging.DEBUG))
            logger.addHandler(cls._json_file(log_dir / "errors.log", logging.ERROR))
        except OSError as e:
            # read-only working directory: console logging only
            logger.warning(f"File logging disabled: {e}")

        cls._loggers[name] = logger
        return logger

    @staticmethod
    def _json_file(path: Path, level: int) -> logging.Handler:
        settings = get_settings()
        handler = logging.handlers.RotatingFileHandler(
            path, maxBytes=settings.LOG_MAX_SIZE, backupCount=settings.LOG_BACKUP_COUNT,
            encoding="utf-8", delay=True,
        )
        handler.setLevel(level)
        handler.setFormatter(JSONFormatter())
        return handler

    @classmethod
    def log_campaign_event(cls, logger: logging.Logger, campaign_id: str,
                           event_type: str, data: Dict[str, Any]):
        """Log campaign lifecycle events"""
        extra_data = {
            'campaign_id': campaign_id,
            'event_type': event_type,
            'data': data
        }

        logger.info(
            f"Campaign {campaign_id}: {event_type}",
            extra={'extra_data': extra_data}
        )

    @classmethod
    def log_batch_progress(cls, logger: logging.Logger, experiment: str,
                           n: float, reps_done: int, reps_total: int,
                           duration_ms: float):
        """Log progress of a replication batch"""
        extra_data = {
            'experiment': experiment,
            'n': n,
            'reps_done': reps_done,
            'reps_total': reps_total,
            'duration_ms': duration_ms
        }

        logger.debug(
            f"{experiment}: n={n:g} {reps_done}/{reps_total} reps ({duration_ms:.2f}ms)",
            extra={'extra_data': extra_data}
        )

    @classmethod
    def log_error_with_context(cls, logger: logging.Logger, error: Exception,
                               context: Dict[str, Any]):
        """Log error with additional context"""
        extra_data = {
            'error_type': type(error).__name__,
            'error_message': str(error),
            'context': context
        }

        logger.error(
            f"Error: {type(error).__name__} - {str(error)}",
            exc_info=True,
            extra={'extra_data': extra_data}
        )
