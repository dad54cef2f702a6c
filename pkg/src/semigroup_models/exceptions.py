"""Exception hierarchy.

Every error raised for a violated input condition derives from
:class:`PreconditionError`; the CLI maps those to exit code 2.
"""


class ModelError(Exception):
    """Base class for all errors raised by this package."""


class PreconditionError(ModelError, ValueError):
    """An input violates a documented precondition."""


class DimensionError(PreconditionError):
    pass


class NotPSDError(PreconditionError):
    pass


class RankDeficiencyError(PreconditionError):
    """A linear solve met a (numerically) singular matrix."""

    def __init__(self, message, rank=None):
        super().__init__(message)
        self.rank = rank


class NotACogeneratorError(PreconditionError):
    """1 is (numerically) an eigenvalue, or an atom of a normal model sits at 1."""


class DomainError(PreconditionError):
    pass


class ConvergenceError(ModelError):
    pass


class InconsistencyError(ModelError):
    """A quantity expected to be constant in z varies across the sample grid."""


class StructureError(PreconditionError):
    pass


class HeadroomError(PreconditionError):
    """Powers used for an asymptotic projection do not exhaust the truncation."""


class DecompositionError(ModelError):
    pass


class TruncationError(PreconditionError):
    """The a priori truncation tail exceeds the requested tolerance."""
