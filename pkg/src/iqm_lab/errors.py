"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class IqmError(Exception):
    """Base class for all library errors."""


class UnknownWorld(IqmError):
    pass


class InvalidWorldSpec(IqmError):
    pass


class InvalidGenerationParams(IqmError):
    def __init__(self, parameter: str, message: str):
        super().__init__(f"{parameter}: {message}")
        self.parameter = parameter


class ExemplarAlreadyConsumed(IqmError):
    pass


class IncompatibleMeasurementSpec(IqmError):
    pass


class UnsupportedEnvironment(IqmError):
    pass


class NotComposable(IqmError):
    pass


class UncodableMarkSet(IqmError):
    pass


class AmbiguousCoding(IqmError):
    pass


class NonPositiveFlightTime(IqmError):
    pass


class NonScalarSpectrum(IqmError):
    pass


class EmptyTable(IqmError):
    pass


class EmptyViewSet(IqmError):
    pass


class NonProductUniverse(IqmError):
    pass


class MalformedModel(IqmError):
    pass


class NonPositiveSpeed(IqmError):
    pass


class ScheduleViolation(IqmError):
    """Raised when an emitted run would let a hypothesized influence reach the second event."""


class ConfigError(IqmError):
    """Base for configuration problems; mapped to exit status 2 by the CLI."""


class SchemaError(ConfigError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class MissingSeed(ConfigError):
    pass
