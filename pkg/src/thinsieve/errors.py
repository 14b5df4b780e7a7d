"""Exception hierarchy shared by every thinsieve module.

The CLI maps ``InputError`` to exit code 2 and ``ComputationError`` to exit
code 3. Module-specific errors subclass one of the two and live next to the
code that raises them.
"""


class ThinSieveError(Exception):
    """Base class for all thinsieve errors."""

    exit_code = 1


class InputError(ThinSieveError):
    """Raised when caller-supplied values violate a precondition."""

    exit_code = 2


class ComputationError(ThinSieveError):
    """Raised when a well-formed computation cannot finish."""

    exit_code = 3


class InsufficientData(ComputationError):
    """Raised when a fit or curve has too few usable points."""

    pass
