"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so every raisable condition that a
subcommand can hit should derive from one of the four roots below.
"""


class ConfigError(ValueError):
    """Bad or missing run-configuration key."""


class DataError(ValueError):
    """Invalid dataset content or layout."""


class CountMismatchError(DataError):
    """Per-site file row counts disagree."""


class NonFiniteError(DataError):
    """NaN or Inf found where finite values are required."""


class UnknownSiteError(DataError):
    """A label or score references a site that is not in the dataset."""


class ContainerError(DataError):
    """Malformed tensor container file."""


class BadMagicError(ContainerError):
    """File does not start with the container magic."""


class TruncatedError(ContainerError):
    """File ends before the declared payload."""


class ZeroRankError(ContainerError):
    """Container declares rank 0."""


class NumericError(ValueError):
    """Numerical contract violation (non-finite loss, degenerate norm, ...)."""
