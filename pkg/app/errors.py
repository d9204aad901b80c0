"""
Exception hierarchy shared by the services, the CLI and the HTTP routers
"""
from typing import Optional


class SublinearError(Exception):
    """Base class for every error raised on purpose by the package"""

    exit_code = 1


class ConfigError(SublinearError):
    """Invalid configuration value, flag or parameter range"""

    exit_code = 2


class InputValidationError(SublinearError):
    """A precondition on an operation's input does not hold"""

    exit_code = 2


class DomainError(InputValidationError):
    """A numeric argument lies outside the operation's domain"""


class LimitExceededError(InputValidationError):
    """An exhaustive routine was asked to enumerate past its limit"""


class GraphFormatError(SublinearError):
    """Malformed graph, stream or metadata file"""

    exit_code = 3

    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class SolverError(SublinearError):
    """The LP solver ended in a state the caller cannot use"""

    exit_code = 1


class VerificationError(SublinearError):
    """One or more invariant checks failed"""

    exit_code = 4
