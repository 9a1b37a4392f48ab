from datetime import date
from typing import Any, Callable, Optional, Tuple
import logging
import traceback
from functools import wraps

logger = logging.getLogger(__name__)


class OzSentinelError(Exception):
    """Base class for every error the library reports on purpose."""

    exit_code = 1
    label = "error"


class UsageError(OzSentinelError):
    exit_code = 2
    label = "usage"


class ConfigurationError(OzSentinelError):
    exit_code = 3
    label = "configuration"


class ContractViolationError(OzSentinelError):
    exit_code = 4
    label = "contract-violation"


class RejectedInputError(OzSentinelError):
    exit_code = 5
    label = "rejected-input"


class ParseError(OzSentinelError):
    exit_code = 6
    label = "parse"

    def __init__(self, message: str, line: int, column: Optional[str] = None):
        self.line = line
        self.column = column
        where = f"line {line}" + (f", column '{column}'" if column else "")
        super().__init__(f"{where}: {message}")


class OrderingError(OzSentinelError):
    exit_code = 7
    label = "ordering"

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class GapError(OzSentinelError):
    exit_code = 8
    label = "gap"

    def __init__(self, first_missing: date, line: int):
        self.first_missing = first_missing
        self.line = line
        super().__init__(f"line {line}: missing day(s) starting at {first_missing.isoformat()}")


class InsufficientDataError(OzSentinelError):
    exit_code = 9
    label = "insufficient-data"


class MissingChannelError(OzSentinelError):
    exit_code = 10
    label = "missing-channel"


class DegenerateActivationError(OzSentinelError):
    exit_code = 11
    label = "degenerate-activation"


class DivergedTrainingError(OzSentinelError):
    exit_code = 12
    label = "diverged-training"

    def __init__(self, model_kind: str, epoch: int):
        self.model_kind = model_kind
        self.epoch = epoch
        super().__init__(f"{model_kind} training diverged (non-finite loss or gradient) at epoch {epoch}")


class UndefinedCorrelationError(OzSentinelError):
    exit_code = 13
    label = "undefined-correlation"


class PolicyError(OzSentinelError):
    exit_code = 14
    label = "policy"


class UnsupportedFlagError(OzSentinelError):
    exit_code = 15
    label = "unsupported-flag"


class OutputExistsError(OzSentinelError):
    exit_code = 16
    label = "output-exists"


class ModelFileError(OzSentinelError):
    exit_code = 17
    label = "model-file"


class ErrorHandler:
    """Centralized helpers that turn failures into reportable values."""

    @staticmethod
    def safe_train(kind: str, train: Callable[[], Any]) -> Tuple[Optional[Any], Optional[str]]:
        """Run a training callable; return (model, None) or (None, error message)."""
        try:
            return train(), None
        except OzSentinelError as e:
            logger.error(f"Training {kind} failed: {e}")
            return None, f"{e.label}: {e}"
        except (ArithmeticError, ValueError) as e:
            logger.error(f"Training {kind} failed: {e}")
            logger.debug(f"Traceback: {traceback.format_exc()}")
            return None, f"error: {e}"

    @staticmethod
    def describe(error: BaseException) -> str:
        """One-line description with the error class label."""
        label = getattr(error, "label", type(error).__name__)
        return f"{label}: {error}"


def error_handler(func: Callable[..., int]) -> Callable[..., int]:
    """Decorator for CLI commands: map raised errors to their exit codes."""

    @wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except OzSentinelError as e:
            logger.error(f"{func.__name__}: {ErrorHandler.describe(e)}")
            logger.debug(f"Traceback: {traceback.format_exc()}")
            return e.exit_code
        except Exception as e:
            logger.error(f"Unexpected error in {func.__name__}: {e}")
            logger.error(f"Traceback: {traceback.format_exc()}")
            return 1

    return wrapper
