"""
Custom Exceptions
Laboratory-specific exception classes

Purpose: Error codes and process exit statuses shared by every module
"""


class RRLabException(Exception):
    """Base exception for the laboratory"""

    def __init__(self, message: str, error_code: str = "GENERIC_ERROR", exit_code: int = 1):
        self.message = message
        self.error_code = error_code
        self.exit_code = exit_code
        super().__init__(self.message)


class ValidationError(RRLabException):
    """Validation error exception"""

    def __init__(self, message: str, error_code: str = "VALIDATION_ERROR"):
        super().__init__(message=message, error_code=error_code, exit_code=2)


class ConfigInvalidError(ValidationError):
    """Experiment configuration failed schema validation"""

    def __init__(self, message: str):
        super().__init__(message=message, error_code="CONFIG_INVALID")


class PreconditionViolationError(RRLabException):
    """An operation was called outside its precondition"""

    def __init__(self, message: str, error_code: str = "PRECONDITION_VIOLATION"):
        super().__init__(message=message, error_code=error_code, exit_code=2)


class WrongResidueClassError(PreconditionViolationError):
    """Root of unity order is in the wrong class modulo 5"""

    def __init__(self, message: str):
        super().__init__(message=message, error_code="WRONG_RESIDUE_CLASS")


class MissingAngleError(RRLabException):
    """A circle point was used without the angle it was built from"""

    def __init__(self, message: str = "point was not built through unit_point"):
        super().__init__(message=message, error_code="MISSING_ANGLE", exit_code=2)


class PrecisionTooLowError(RRLabException):
    """Re-evaluation at doubled precision disagreed beyond the guard bits"""

    def __init__(self, message: str):
        super().__init__(message=message, error_code="PRECISION_TOO_LOW", exit_code=3)


class CapExceededError(RRLabException):
    """A quantity could not be materialized within the configured caps"""

    def __init__(self, message: str):
        super().__init__(message=message, error_code="CAP_EXCEEDED", exit_code=4)


class InternalConsistencyError(RRLabException):
    """A provable identity failed; indicates a bug, never bad input"""

    def __init__(self, message: str):
        super().__init__(message=message, error_code="INTERNAL_CONSISTENCY", exit_code=70)
