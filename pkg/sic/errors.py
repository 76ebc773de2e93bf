"""
Error roots shared by every app.

Domain failures are ``ValueError`` subclasses; the three roots decide the
process exit code when a management command fails.
"""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class DataError(ValueError):
    """Invalid, inconsistent or numerically unusable data."""


class ConstraintViolation(ValueError):
    """Hardware schedule or sizing constraint violated."""


EXIT_CODES = {
    ConfigError: 2,
    DataError: 3,
    ConstraintViolation: 4,
}


def exit_code_for(error: Exception) -> int:
    """Exit code for a domain error, 1 for anything else."""
    for error_class, code in EXIT_CODES.items():
        if isinstance(error, error_class):
            return code
    return 1
