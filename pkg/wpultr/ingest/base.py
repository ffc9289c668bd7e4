"""Base class for click log file formats."""

import logging
from abc import ABC, abstractmethod
from pathlib import Path

from wpultr.core.errors import LogValidationError
from wpultr.core.models import ClickLog
from wpultr.core.validation import validate_log

logger = logging.getLogger(__name__)


class LogFormat(ABC):
    """Base class for all log readers and writers.

    ``read`` and ``write`` wrap the format-specific hooks with existence and
    invariant checks, so every format returns and accepts only valid logs.
    """

    format_name: str = "base"

    def read(self, path: str | Path) -> ClickLog:
        """
        Read and validate a log.

        Raises:
            FileNotFoundError: If the file does not exist.
            LogValidationError: If the parsed log breaks a type invariant.
        """
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"log file not found: {path}")
        log = self._do_read(path)
        violations = validate_log(log)
        if violations:
            raise LogValidationError(violations)
        logger.info("Read %d records (%d queries) from %s", len(log), len(log.grouped_by_query), path)
        return log

    def write(self, log: ClickLog, path: str | Path) -> None:
        """Validate then write a log; the output is deterministic for a given log."""
        violations = validate_log(log)
        if violations:
            raise LogValidationError(violations)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self._do_write(log, path)
        logger.info("Wrote %d records to %s", len(log), path)

    @abstractmethod
    def _do_read(self, path: Path) -> ClickLog:
        """Parse ``path`` into a ClickLog without invariant checks."""

    @abstractmethod
    def _do_write(self, log: ClickLog, path: Path) -> None:
        """Serialize ``log`` to ``path``."""
