"""Exception types shared across the package."""


class TfImmseError(ValueError):
    """Base class for all library errors."""


class ConstructionError(TfImmseError):
    """A value object was built from invalid parameters."""


class ShapeError(TfImmseError):
    """Operands have incompatible lengths, rates or grids."""


class UsageError(TfImmseError):
    """An operation was called in a mode it does not support."""
