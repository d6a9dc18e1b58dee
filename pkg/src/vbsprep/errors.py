"""Shared exception types."""


class InvalidStateError(ValueError):
    """A statevector violates a precondition (norm, support, subspace)."""


class EmptyResultError(RuntimeError):
    """Post-selection or projection discarded every shot / all amplitude."""


class CalibrationError(ValueError):
    """A readout confusion matrix is singular or otherwise unusable."""
