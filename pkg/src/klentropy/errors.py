"""Exception hierarchy.

Each class maps onto one CLI exit code (see :mod:`klentropy.cli`).
"""


class KLEntropyError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(KLEntropyError, ValueError):
    """An argument lies outside the domain of the function."""


class ArityError(KLEntropyError, ValueError):
    """Wrong number of items: too few points, mismatched lengths, bad index."""


class DegenerateDataError(KLEntropyError, ValueError):
    """Coincident points make a nearest-neighbour distance zero."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(int(i) for i in indices)


class DecompositionError(KLEntropyError, ValueError):
    """A matrix that must be positive definite is not."""


class InvalidSpecError(KLEntropyError, ValueError):
    """A process or plan specification violates its invariants."""
