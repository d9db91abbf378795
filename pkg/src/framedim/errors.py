"""Exception types shared across the library."""


class FramedimError(Exception):
    """Base class for all library errors."""


class SpecValidationError(FramedimError):
    """A measure, level-set, or spectrum description violates its invariants."""


class BaseMismatchError(FramedimError):
    """A cell's base does not match the natural base of the measure."""


class ZeroMassError(FramedimError):
    """An operation requires positive mass on a cell that carries none."""


class FourierToleranceError(FramedimError):
    """The requested Fourier accuracy is unreachable for this representation."""


class ResourceLimitError(FramedimError):
    """A configured resource limit would be exceeded.

    The message always names the limit so callers can raise it deliberately.
    """

    def __init__(self, limit_name: str, limit_value, requested):
        self.limit_name = limit_name
        self.limit_value = limit_value
        self.requested = requested
        super().__init__(
            f"{limit_name}={limit_value} exceeded (requested {requested})"
        )


class QuadratureError(FramedimError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class UnsupportedOperationError(FramedimError):
    """The operation is not defined (or not exactly computable) for this spec kind."""


class UndecidableSupportError(FramedimError):
    """Support membership / support-mass queries are undecidable for these kinds."""


class LemmaPreconditionError(FramedimError):
    """A checker's mathematical precondition fails, so the check is vacuous."""
