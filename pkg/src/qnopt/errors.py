"""Exception types raised across the toolkit."""


class QNOptError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(QNOptError, ValueError):
    pass


class RankDeficient(QNOptError):
    """A column of a tall-skinny factorization is numerically dependent."""

    def __init__(self, column: int, message: str | None = None):
        self.column = column
        super().__init__(message or f"rank deficiency detected at column {column}")


class NotSymmetric(QNOptError, ValueError):
    pass


class Singular(QNOptError):
    pass


class EmptyMemory(QNOptError):
    pass


class DimensionTooLarge(QNOptError, ValueError):
    pass


class NonFiniteGradient(QNOptError, FloatingPointError):
    pass


class NotDescent(QNOptError, ValueError):
    pass


class HardCaseUnresolved(QNOptError):
    pass


class NonPositivePred(QNOptError):
    pass


class BadSimplex(QNOptError, ValueError):
    pass


class ShapeMismatch(QNOptError, ValueError):
    pass


class UnknownLayer(QNOptError, ValueError):
    pass


class DataError(QNOptError):
    """Base class for dataset loading failures."""


class BadMagic(DataError):
    pass


class CountMismatch(DataError):
    pass


class TruncatedFile(DataError):
    pass


class StaleOverlap(QNOptError, ValueError):
    pass


class EmptyBatch(QNOptError, ValueError):
    pass


class StepTooLarge(QNOptError, ValueError):
    pass


class ConfigError(QNOptError, ValueError):
    pass
