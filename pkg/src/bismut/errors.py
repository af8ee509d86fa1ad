"""Exception hierarchy shared by all modules."""


class GeometryError(Exception):
    """Base class for every error raised by this package."""


class DomainError(GeometryError):
    """A point (or a finite-difference stencil around it) lies outside the chart domain."""


class SingularMetric(GeometryError):
    """The Hermitian matrix is not positive definite at the requested point."""


class DomainExit(GeometryError):
    """An integrated trajectory left the chart domain."""

    def __init__(self, message: str, exit_time: float):
        super().__init__(message)
        self.exit_time = exit_time


class StepTooLarge(GeometryError):
    pass


class NoConvergence(GeometryError):
    pass


class BeyondInjectivityBound(GeometryError):
    pass


class ZeroVector(GeometryError):
    pass


class PoleError(GeometryError):
    pass


class ConjugatePoint(GeometryError):
    pass


class NotProper(GeometryError):
    pass


class GridMismatch(GeometryError):
    pass


class BadSeedFrame(GeometryError):
    pass


class InconclusiveK(GeometryError):
    pass


class SelfTestError(GeometryError):
    """A startup convention check on a metric model failed."""


class ConfigError(GeometryError):
    pass


class UnknownModel(ConfigError):
    pass


class BadParams(ConfigError):
    pass
