"""Exception and warning types.

Each exception carries an ``exit_code`` used by the command-line front end:
2 for usage/parse/range problems, 3 for mathematical infeasibility and 4 for
violated modelling hypotheses.
"""

from __future__ import annotations


class TwinforgeError(Exception):
    exit_code = 3


# -- input / format ---------------------------------------------------------

class InputError(TwinforgeError, ValueError):
    exit_code = 2


class NotSymmetric(InputError):
    pass


class NonPositiveDeterminant(TwinforgeError):
    pass


class ParseError(InputError):
    """Malformed input. ``line`` and ``column`` are 1-based when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class DimensionMismatch(ParseError):
    pass


class FieldTooSmall(InputError):
    pass


class ProfileOutOfRange(InputError):
    pass


class InvalidWellSet(InputError):
    pass


# -- mathematical infeasibility --------------------------------------------

class IdenticalVariants(TwinforgeError):
    pass


class SpectrumMismatch(TwinforgeError):
    pass


class SingularU1(TwinforgeError):
    pass


class InconsistentClassification(TwinforgeError):
    pass


class NotATwinSolution(TwinforgeError):
    pass


class CofactorNotSatisfied(TwinforgeError):
    pass


class NoSharedShearVector(TwinforgeError):
    pass


class NoSharedNormal(TwinforgeError):
    pass


class DegenerateF(TwinforgeError):
    pass


class MiddleEigenvalueNotOne(TwinforgeError):
    """No habit plane: the middle singular value misses 1 by ``deviation``."""

    def __init__(self, deviation: float, sigma_mid: float | None = None):
        self.deviation = float(deviation)
        self.sigma_mid = sigma_mid
        super().__init__(f"middle singular value deviates from 1 by {self.deviation:.3e}")


class MuEqualsOne(TwinforgeError):
    pass


class DEqualsMuSquared(TwinforgeError):
    pass


class Infeasible(TwinforgeError):
    pass


class NotQuadratic(TwinforgeError):
    pass


# -- hypothesis violations --------------------------------------------------

class HypothesisViolation(TwinforgeError):
    exit_code = 4


class NotAGradient(HypothesisViolation):
    def __init__(self, message: str, closure_residual: float | None = None):
        self.closure_residual = closure_residual
        super().__init__(message)


class NotOneDimensional(HypothesisViolation):
    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


class ZeroShearOnInterface(HypothesisViolation):
    pass


# -- warnings (flags) -------------------------------------------------------

class TwinforgeWarning(UserWarning):
    flag = "Warning"


class DegenerateFamily(TwinforgeWarning):
    flag = "DegenerateFamily"


class MultipleFamilies(TwinforgeWarning):
    flag = "MultipleFamilies"


class TheoremViolation(TwinforgeWarning):
    flag = "TheoremViolation"


class StationaryInterval(TwinforgeWarning):
    flag = "StationaryInterval"


class BranchDiscontinuity(TwinforgeWarning):
    flag = "BranchDiscontinuity"


class DegenerateInterface(TwinforgeWarning):
    flag = "DegenerateInterface"
