"""Exception types shared across the package."""


class QGraphLabError(Exception):
    """Base class for package errors."""


class ConfigurationError(QGraphLabError):
    """Invalid user-supplied parameters or config files (CLI exit code 2)."""


class NumericalIntegrityError(QGraphLabError):
    """A numerical sanity gate failed: non-unitary operator, singular solve,
    broken certificate. Results would be untrustworthy (CLI exit code 3)."""


class SolverError(NumericalIntegrityError):
    """The level finder could not certify completeness within its budget."""
