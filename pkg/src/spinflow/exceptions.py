"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes (see spinflow.cli).
"""


class SpinflowError(Exception):
    """Base class for all package errors."""


class ConfigError(SpinflowError):
    """Invalid or inconsistent user configuration (CLI exit code 2)."""


class NumericalError(SpinflowError):
    """Numerical failure during integration or sampling (CLI exit code 3).

    Raised e.g. for non-finite energies, step sizes violating the hard
    stability bound, or a pre-renormalization spin norm collapsing below 0.5.
    """


class ValidatorFailure(SpinflowError):
    """A statistical validator did not pass (CLI exit code 4)."""
