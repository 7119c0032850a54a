"""
Exception hierarchy shared by the solvers and the command line
"""

from typing import Optional


class TwcError(Exception):
    """Base class for every toolkit error"""

    exit_code = 1


class ValidationError(TwcError, ValueError):
    """Bad input: malformed pmf, alphabet mismatch, schema violation, ..."""

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionCapError(ValidationError):
    """A dense table or search grid exceeds its configured cap"""


class InfeasibleTargetError(ValidationError):
    """Distortion target below the minimum achievable distortion"""


class ConfigurationError(ValidationError):
    """Configuration violates a structural precondition"""


class CommonPartError(ValidationError):
    """Declared common part does not satisfy the required Markov chain"""


class CausalityError(ValidationError):
    """An encoder tried to read a channel output it cannot have seen yet"""


class RateMismatchError(ValidationError):
    """Scheme block lengths do not match the requested rate"""


class ConvergenceError(TwcError, RuntimeError):
    """An iterative procedure failed to reach its tolerance"""

    exit_code = 3
