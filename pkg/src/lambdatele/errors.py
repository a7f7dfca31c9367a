"""Exception hierarchy shared by every module of the simulator."""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for all simulator errors."""


class DomainError(SimulationError, ValueError):
    """An argument lies outside the domain of the operation."""


class ShapeError(SimulationError, ValueError):
    """A subsystem index or subsystem list does not fit the operation."""


class CapacityError(SimulationError):
    """A joint Hilbert space would exceed the configured size limit."""


class TruncationError(SimulationError):
    """Probability mass spilled past the Fock-space cutoff.

    ``required_n_max`` is filled in when the cutoff needed to satisfy the
    tolerance can be computed analytically.
    """

    def __init__(self, message: str, *, tail: float | None = None, required_n_max: int | None = None):
        super().__init__(message)
        self.tail = tail
        self.required_n_max = required_n_max


class TruncationWarning(UserWarning):
    """Emitted when an operator clips a block at the top Fock level."""


class UnsupportedOperationError(SimulationError):
    """The operation is not defined for this kind of subsystem."""


class PostSelectionError(SimulationError):
    """The requested measurement outcome has (numerically) zero probability."""

    def __init__(self, message: str, *, probability: float = 0.0):
        super().__init__(message)
        self.probability = probability


class ModelMismatchError(SimulationError):
    """The physical model and the qubit abstraction disagree beyond the bound."""
