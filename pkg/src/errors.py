"""
Exception hierarchy shared by the network calculus, the fixed point checkers, the MLFP
compiler and the command line runner.
"""


# -----------------------
# Exceptions
# -----------------------

class MlfpException(Exception):
    pass


class ShapeError(MlfpException):
    pass


class InputShapeError(ShapeError):
    pass


class CompositionError(ShapeError):
    pass


class DepthError(ShapeError):
    pass


class InvalidActivationError(MlfpException):
    pass


class DomainError(MlfpException):
    pass


class MeasureError(MlfpException):
    pass


class NoContractionError(MlfpException):
    pass


class ConvergenceError(MlfpException):
    pass


class ScheduleError(MlfpException):
    pass


class BudgetError(MlfpException):
    pass


class OracleDomainError(MlfpException):
    pass


class ParseError(MlfpException):
    pass


class UsageError(MlfpException):
    pass
