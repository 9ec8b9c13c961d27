"""Exception hierarchy shared across the package.

Every error raised on purpose derives from DriftguardError so callers
(CLI, service) can map failures to exit codes / HTTP statuses without
matching on message text.
"""


class DriftguardError(Exception):
    """Base class for all deliberate failures."""


class ConfigError(DriftguardError):
    """Invalid configuration: bad shapes, out-of-range hyperparameters,
    malformed config files, unknown enumeration values."""


class InputError(DriftguardError):
    """Invalid runtime data: empty inputs, length mismatches, values
    outside a function's documented domain."""


class ParseError(InputError):
    """A file or payload could not be decoded into the expected format."""


class DomainError(InputError):
    """An argument violates a mathematical domain requirement."""


class NumericError(DriftguardError):
    """A computation produced non-finite values or diverged."""
