"""Exception hierarchy.

Precondition violations derive from :class:`ConfigError` (CLI exit code 2),
failures during computation from :class:`NumericalError` (exit code 3).
"""


class AtomemError(Exception):
    pass


class ConfigError(AtomemError, ValueError):
    pass


class NumericalError(AtomemError, ArithmeticError):
    pass


class DetuningTooSmallError(ConfigError):
    pass


class OutOfCalibrationRangeError(ConfigError):
    pass


class ZeroAtomNumberError(ConfigError):
    pass


class ZeroDampingError(ConfigError):
    pass


class EmptySampleError(ConfigError):
    pass


class DegenerateDistributionError(ConfigError):
    pass


class InsufficientDataError(ConfigError):
    pass


class NonPositiveSampleError(ConfigError):
    pass


class DegenerateInputError(ConfigError):
    pass


class NonFiniteResultError(NumericalError):
    pass


class StepSizeUnderflowError(NumericalError):
    pass


class NonFiniteStateError(NumericalError):
    pass
