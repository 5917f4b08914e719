"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""


class SparsensError(Exception):
    exit_code = 1


class InputError(SparsensError, ValueError):
    """Rejected input: non-finite samples, malformed grids, bad exponents."""

    exit_code = 2


class ConfigError(InputError):
    exit_code = 2


class RangeError(InputError):
    """A dyadic level or exponent lies outside the admissible range."""

    exit_code = 3


class ResolutionError(SparsensError):
    """The grid cannot resolve the requested scale."""

    exit_code = 3


class DomainError(SparsensError):
    """The periodic box is too small for the requested kernel or scale."""

    exit_code = 3


class DegenerateInputError(SparsensError, ValueError):
    """Identically zero data where a nonzero field is required."""

    exit_code = 2


class ContractError(SparsensError):
    """A documented precondition of an experiment is not met."""

    exit_code = 1


class CFLError(SparsensError):
    """Time step rejected; ``suggested_dt`` holds an admissible value."""

    exit_code = 3

    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class CalibrationError(SparsensError):
    exit_code = 1


class BundleError(SparsensError):
    exit_code = 2
