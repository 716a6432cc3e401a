class QevoteError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(QevoteError, ValueError):
    """Invalid election or experiment parameters."""


class PreconditionError(QevoteError, ValueError):
    """An operation was called with arguments violating its contract."""


class ResourceLimitError(QevoteError):
    """Requested simulation exceeds the configured qubit cap."""


class SpentStateError(QevoteError):
    """A distributed quantum state was used after it had been measured."""


class ProtocolError(QevoteError, RuntimeError):
    """Diagnostic abort: a subroutine failed to reach its postcondition."""


class StrategyFault(QevoteError):
    """An adversary strategy produced an invalid object."""


class BoardRejected(QevoteError):
    """A bulletin board with the wrong shape was presented for tallying."""
