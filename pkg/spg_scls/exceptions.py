import logging
import warnings

_log = logging.getLogger(__name__)


class SclsError(Exception):
    """Root of every error raised by spg_scls."""


class InputError(SclsError):
    """The problem data, a file or a configuration is invalid."""


class NumericalError(SclsError):
    """A numerical step failed or a certificate could not be established."""


class DimensionMismatch(InputError):
    pass


class NonPositiveGamma(InputError):
    pass


class NonFiniteEntry(InputError):
    pass


class ConfigError(InputError):
    pass


class InfeasibleInput(InputError):
    pass


class SchemaError(InputError):
    pass


class IndexOutOfRange(InputError):
    pass


class DimensionTooLarge(InputError):
    pass


class UnsupportedDimension(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None, column: int | str | None = None):
        location = ""
        if line is not None:
            location += f"line {line}"
        if column is not None:
            location += f"{', ' * bool(location)}column {column}"

        super().__init__(f"{message}{f' ({location})' * bool(location)}")

        self.line = line
        self.column = column


class DegeneratePole(NumericalError):
    pass


class ZeroDirection(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class NotStationary(NumericalError):
    pass


class NotGloballyCertified(NumericalError):
    def __init__(self, message: str, multiplier: float):
        super().__init__(message)

        self.multiplier = multiplier


class DescentViolation(NumericalError):
    def __init__(self, index: int, message: str = ""):
        super().__init__(f"descent violated at iteration {index}{f': {message}' * bool(message)}")

        self.index = index


class NumericalWarning(Warning):
    def __init__(self, message: str, stacklevel: int = 2):
        super().__init__(message)

        self.stacklevel = stacklevel


def issue_warning(warning: NumericalWarning):
    _log.warning("%s", warning)
    warnings.warn(warning, stacklevel=warning.stacklevel + 1)
