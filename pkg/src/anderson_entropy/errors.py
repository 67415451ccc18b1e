"""Exception types shared across the package."""


class AndersonEntropyError(Exception):
    """Base class for package errors."""


class ConfigError(AndersonEntropyError, ValueError):
    """Invalid configuration or parameter combination."""


class NumericalDefectError(AndersonEntropyError, ArithmeticError):
    """A numerical invariant was violated (broken projector, bound violation, ...)."""


class SpectralError(NumericalDefectError):
    """Eigensolver failure.

    Carries a short fingerprint of the offending matrix so the failing
    realization can be identified and replayed.
    """

    def __init__(self, message, fingerprint=None):
        if fingerprint is not None:
            message = f"{message} [matrix fingerprint {fingerprint}]"
        super().__init__(message)
        self.fingerprint = fingerprint


class InsufficientDataError(AndersonEntropyError, ValueError):
    """Not enough samples or points for the requested statistic or fit."""


class BoundViolationError(NumericalDefectError):
    """An entropy bound was violated beyond the numerical slack."""
