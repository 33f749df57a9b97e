"""Exception types shared across the package."""


class TadkitError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(TadkitError, ValueError):
    """Inputs have inconsistent shapes or sizes."""


class ContractViolationError(TadkitError, ValueError):
    """An operation was called with arguments that violate its preconditions."""


class NumericalError(TadkitError, RuntimeError):
    """A factorization or solve failed even after jitter escalation.

    The ``context`` dict carries whatever the failing operation knew about
    the offending geometry (matrix label, shape, jitter attempts, ...).
    """

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = dict(context)


class OptimizationError(TadkitError, RuntimeError):
    """Every restart of an optimizer failed; diagnostics in ``context``."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = dict(context)


class CampaignFinishedError(TadkitError, RuntimeError):
    """A step was requested on a campaign that already converged."""


class AwaitingObservationsError(TadkitError, RuntimeError):
    """Interactive campaign has a pending batch with no observations yet."""


class NoPendingBatchError(TadkitError, RuntimeError):
    """Observations were supplied but no batch is awaiting them."""


class ConfigError(TadkitError, ValueError):
    """A campaign configuration is missing fields or fails validation."""


class UnsupportedVersionError(TadkitError, ValueError):
    """A persisted state file declares a format version we cannot read."""


class StateParseError(TadkitError, ValueError):
    """A persisted state file is corrupt; ``offset`` is the byte position."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset
