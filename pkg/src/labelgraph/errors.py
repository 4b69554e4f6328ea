"""Exception types shared across the package."""


class Error(Exception):
    """Base class for every error raised by this package."""


class ShapeError(Error, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(Error, ValueError):
    """An argument is outside the operation's defined domain."""


class ContractError(Error, RuntimeError):
    """A caller-side precondition was violated (non-scalar loss, impure function, ...)."""


class ParseError(Error, ValueError):
    """A file could not be decoded into records."""


class ValidationError(Error, ValueError):
    """Decoded data violates a structural invariant."""


class ConfigError(Error, ValueError):
    """A configuration value or key is invalid."""


class TrainingError(Error, RuntimeError):
    """Optimization cannot continue (for example a non-finite gradient)."""


class CheckpointError(Error, ValueError):
    """A checkpoint file has the wrong version or inconsistent contents."""
