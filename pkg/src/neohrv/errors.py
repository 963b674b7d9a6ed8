"""Exception types shared across the package."""


class NeoHrvError(Exception):
    """Base class for package errors."""


class ValidationError(NeoHrvError):
    """Malformed or out-of-range input data (files, channels, metadata)."""


class DegenerateError(NeoHrvError):
    """Numerically degenerate situation (single-class data, empty subsets)."""


class LeakageError(NeoHrvError):
    """A test subject's epochs reached a training set. Must never happen."""
