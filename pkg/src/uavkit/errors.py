"""Exception and warning types shared across uavkit."""


class UavkitError(Exception):
    """Base class for all uavkit errors."""


class InvalidInputError(UavkitError, ValueError):
    """An argument violates a documented precondition."""


class SingularityError(UavkitError, ArithmeticError):
    """A representation is evaluated too close to its singular configuration."""


class InvalidMeasurementError(UavkitError, ValueError):
    """A sensor-derived quantity is outside its physically valid range."""


class IndeterminateHeadingError(UavkitError, ValueError):
    """The magnetic vector has no usable horizontal component."""


class DegenerateGeometryError(UavkitError, ValueError):
    """Two observation vectors are (nearly) collinear."""


class NumericallyDegenerateError(UavkitError, ArithmeticError):
    """A matrix that must be inverted is singular or badly conditioned."""


class InputOrderError(UavkitError, ValueError):
    """A time-ordered stream contains a timestamp that goes backwards."""


class FootprintUnboundedError(UavkitError, ValueError):
    """A camera corner ray does not intersect the ground plane."""


class PlanError(UavkitError, ValueError):
    """A survey or mission plan cannot be built from the given inputs."""


class FormatError(UavkitError, ValueError):
    """A file does not follow its documented format.

    ``line`` carries the 1-based line number when known.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)


class NormalizationWarning(UserWarning):
    """A quaternion was noticeably non-unit and has been renormalized."""


class GimbalLockWarning(UserWarning):
    """Euler extraction happened at (or extremely near) pitch = +-90 degrees."""
