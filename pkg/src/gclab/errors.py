"""Exception types raised across gclab."""


class GclabError(Exception):
    """Base class for all library errors."""


class InvalidInputError(GclabError, ValueError):
    pass


class DegenerateDegreeError(GclabError, ValueError):
    """A vertex has zero degree where a normalized shift was requested."""


class UnreachableError(GclabError):
    pass


class JointDiagonalizationError(GclabError):
    pass


class AssumptionViolatedError(GclabError):
    """The joint spectrum is not distinct, so interpolation is undefined."""


class InterpolationUnavailableError(GclabError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class LiftingUnavailableError(GclabError):
    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class DegenerateTargetError(GclabError, ValueError):
    """The target vector is identically zero."""


class DivergedError(GclabError):
    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


class EmptyMeasureError(GclabError, ValueError):
    pass


class InvalidFamilyError(GclabError, ValueError):
    pass


class IngestionError(GclabError):
    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = list(missing)


class DataParseError(GclabError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class NoNextDayError(GclabError, ValueError):
    pass


class OutOfRangeError(GclabError, ValueError):
    pass


class ConfigError(GclabError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
