"""Exception hierarchy shared by all rotor modules."""


class RotorError(Exception):
    """Base class for every error raised by rotor."""


class NonFiniteEvaluation(RotorError, ArithmeticError):
    """A field component evaluated to NaN or infinity at a finite point."""

    def __init__(self, t, x, y, value):
        super().__init__(f"non-finite field value {value!r} at t={t!r}, x={x!r}, y={y!r}")
        self.t, self.x, self.y, self.value = t, x, y, value


class PeriodMismatch(RotorError, ValueError):
    pass


class NotHamiltonian(RotorError, ValueError):
    pass


class DomainError(RotorError, ValueError):
    pass


class OriginStart(RotorError, ValueError):
    pass


class ZeroVector(RotorError):
    """A displacement vector vanished on a curve; the degree is undefined there."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class RefineNeeded(RotorError):
    pass


class BoundaryEscape(RotorError):
    pass


class InternalInconsistency(RotorError):
    pass


class LevelNotEnclosing(RotorError):
    pass


class AmbiguousTopology(RotorError):
    pass


class NoConvergence(RotorError):
    pass


class JacobianSingular(RotorError):
    pass


class SplitFailure(RotorError):
    pass


class PreconditionError(RotorError, ValueError):
    pass


class ParseError(RotorError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class StageFailure(RotorError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
