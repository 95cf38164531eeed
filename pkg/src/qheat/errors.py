"""Exception hierarchy shared by all qheat modules."""


class QHeatError(Exception):
    """Base class for every error raised by qheat."""


class NonHermitianInput(QHeatError, ValueError):
    pass


class NonUnitaryBasis(QHeatError, ValueError):
    pass


class DegenerateSpectrum(QHeatError, ValueError):
    pass


class ZeroPopulation(QHeatError, ValueError):
    """A population vanished where the (alpha, beta) chart needs strictly positive ones."""


class DegenerateDirection(QHeatError, ValueError):
    pass


class InvalidSpec(QHeatError, ValueError):
    pass


class BracketNotFound(QHeatError, ArithmeticError):
    """Bracket expansion left the search range before G crossed 1.

    ``boundary`` holds the last epsilon tried and ``value`` the G found there.
    """

    def __init__(self, message: str, boundary: float = float("nan"), value: float = float("nan")):
        super().__init__(message)
        self.boundary = boundary
        self.value = value
