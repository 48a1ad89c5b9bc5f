"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to.
"""


class ReconError(Exception):
    exit_code = 1


class InvalidConfigError(ReconError, ValueError):
    exit_code = 2


class InvalidInputError(ReconError, ValueError):
    exit_code = 3


class InvalidShapeError(InvalidInputError):
    pass


class InsufficientCalibrationError(InvalidInputError):
    pass


class FormatError(ReconError):
    exit_code = 3


class BadMagicError(FormatError):
    pass


class VersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class IntegrityError(FormatError):
    pass


class NumericError(ReconError, ArithmeticError):
    exit_code = 4
