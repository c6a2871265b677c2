"""Exception hierarchy. CLI maps these onto exit codes (data=2, numeric=3)."""


class PoseSpaceError(Exception):
    """Base class for all library errors."""


class DataError(PoseSpaceError):
    """Malformed or inconsistent input data (parse failures, bad indices, ...)."""


class NumericalError(PoseSpaceError):
    """Non-finite values or failed numerical procedures."""
