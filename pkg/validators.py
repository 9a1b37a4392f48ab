from datetime import date
from typing import Optional, Sequence, Tuple
import math
import logging

import numpy as np

from error_handlers import ContractViolationError, RejectedInputError

logger = logging.getLogger(__name__)


class VectorValidator:
    """Handles validation of model input vectors and targets."""

    @staticmethod
    def validate_dimension(values: Sequence[float], expected: int) -> Tuple[bool, str]:
        """Validate vector length."""
        if len(values) != expected:
            return False, f"expected a vector of length {expected}, got {len(values)}"
        return True, "Dimension matches"

    @staticmethod
    def validate_finite(values: Sequence[float]) -> Tuple[bool, str]:
        """Validate that every entry is a finite number."""
        arr = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            return False, f"entry {bad} is not finite ({arr.flat[bad]})"
        return True, "All entries finite"


def require_vector(values: Sequence[float], expected: int) -> np.ndarray:
    """Return `values` as a float array or raise the matching error."""
    ok, message = VectorValidator.validate_dimension(values, expected)
    if not ok:
        raise ContractViolationError(message)
    ok, message = VectorValidator.validate_finite(values)
    if not ok:
        raise RejectedInputError(message)
    return np.asarray(values, dtype=float)


def require_finite_scalar(value: float, name: str) -> float:
    if not math.isfinite(value):
        raise RejectedInputError(f"{name} must be finite, got {value}")
    return float(value)


class DateValidator:
    """Handles validation of daily timestamp sequences."""

    @staticmethod
    def validate_increasing(dates: Sequence[date]) -> Tuple[bool, str, Optional[int]]:
        """Validate that dates are strictly increasing; return the first offending index."""
        for i in range(1, len(dates)):
            if dates[i] <= dates[i - 1]:
                return False, f"date {dates[i].isoformat()} does not follow {dates[i - 1].isoformat()}", i
        return True, "Dates strictly increasing", None


class SplitValidator:
    """Handles validation of train/validation/test fractions."""

    @staticmethod
    def validate_fractions(fractions: Sequence[float]) -> Tuple[bool, str]:
        if len(fractions) != 3:
            return False, "Provide exactly three fractions (train, validation, test)"
        if any(f < 0 or not math.isfinite(f) for f in fractions):
            return False, "Fractions must be finite and non-negative"
        if abs(sum(fractions) - 1.0) > 1e-9:
            return False, f"Fractions must sum to 1, got {sum(fractions)}"
        return True, "Fractions valid"


class PolicyValidator:
    """Handles validation of alarm threshold bands."""

    @staticmethod
    def validate_bounds(bounds: Sequence[float]) -> Tuple[bool, str]:
        if not bounds:
            return False, "An alarm policy needs at least one band"
        if any(not math.isfinite(b) for b in bounds):
            return False, "Band bounds must be finite"
        diffs = np.diff(np.asarray(bounds, dtype=float))
        if len(diffs) and not (np.all(diffs > 0) or np.all(diffs < 0)):
            return False, "Band bounds must be strictly monotone"
        return True, "Bounds valid"

    @staticmethod
    def validate_labels(labels: Sequence[str]) -> Tuple[bool, str]:
        if any(not label.strip() for label in labels):
            return False, "Severity labels must be non-empty"
        if len(set(labels)) != len(labels):
            return False, "Severity labels must be unique"
        return True, "Labels valid"
