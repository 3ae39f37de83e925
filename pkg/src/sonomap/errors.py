"""Exception hierarchy shared by every sonomap module.

The CLI maps these onto process exit codes: DataError -> 2,
ConfigError -> 3, DivergenceError -> 4, EnvironmentFault -> 5.
"""


class SonomapError(Exception):
    """Base class for all errors raised by this package."""


class DataError(SonomapError):
    """Input data is malformed, empty, or otherwise unusable."""


class ParseError(DataError):
    """A file or message could not be parsed; carries row/line context."""


class InsufficientDataError(DataError):
    """Too few samples/markers/examples for the requested computation."""


class ConfigError(SonomapError):
    """A parameter, schema, or flag violates its contract."""


class SchemaError(ConfigError):
    """Structurally wrong input: bad column layout, wrong dimensions."""


class ParameterError(ConfigError):
    """A numeric or enum parameter is out of its legal range."""


class UnsupportedFormatError(ConfigError):
    """File format or codec this package does not handle."""


class DivergenceError(SonomapError):
    """Numerical optimisation produced non-finite values."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ProtocolError(SonomapError):
    """Action not legal in the current session phase."""

    def __init__(self, message, legal_actions=()):
        super().__init__(message)
        self.legal_actions = tuple(legal_actions)


class EnvironmentFault(SonomapError):
    """The surrounding environment refused a resource (port, path)."""
