"""Shared exception types."""


class ConfigurationError(ValueError):
    """A configuration value violates a documented constraint."""


class ShapeError(ValueError):
    """A tensor or image has an unsupported shape."""


class ContractError(ValueError):
    """A caller violated an operation precondition."""


class FormatError(ValueError):
    """A persisted file could not be parsed."""


class IntegrityError(ValueError):
    """Persisted data is internally inconsistent."""
