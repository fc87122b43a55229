"""Exception types shared across the package."""


class TcsdeError(Exception):
    """Base class for all package errors."""


class ValidationError(TcsdeError):
    """Input data violates a documented invariant (bad file, bad field, bad shape)."""


class NumericsError(TcsdeError):
    """A numerical procedure failed (divergence, singular system, empty bracket)."""
