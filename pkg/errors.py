# ~/dirkde/errors.py
from typing import Optional, Sequence


class DirKdeError(Exception):
    """Base error. `exit_code` plays the role a status code plays for an API error."""

    exit_code = 2

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# --- usage / input ---
class DomainError(DirKdeError, ValueError):
    exit_code = 1


class UsageError(DirKdeError):
    exit_code = 1


class ModelFileError(UsageError):
    pass


class ConfigError(UsageError):
    pass


class KernelConditionError(DomainError):
    """Kernel profile fails the integrability condition on [0, inf)."""


# --- numeric ---
class NumericError(DirKdeError):
    exit_code = 2


class OverflowNumericError(NumericError, OverflowError):
    pass


class NonFiniteError(NumericError):
    pass


class DegenerateTargetError(NumericError):
    pass


class ConvergenceError(NumericError):
    def __init__(self, detail: str, best: Optional[Sequence[float]] = None, iterations: int = 0):
        super().__init__(detail)
        self.best = None if best is None else tuple(float(v) for v in best)
        self.iterations = iterations


# --- verification ---
class VerificationError(DirKdeError):
    exit_code = 3
