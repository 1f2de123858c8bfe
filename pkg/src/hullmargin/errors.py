"""Exception hierarchy shared by all modules."""


class HullMarginError(Exception):
    """Base class for library errors."""


class NonFinite(HullMarginError, ValueError):
    pass


class IterationCapExceeded(HullMarginError, RuntimeError):
    pass


class DegenerateEllipsoid(HullMarginError, ValueError):
    pass


class EmptyChord(HullMarginError, RuntimeError):
    pass


class RankDeficientSamples(HullMarginError, ValueError):
    pass


class RoundingLost(HullMarginError, RuntimeError):
    pass


class InvalidClass(HullMarginError, ValueError):
    pass


class OracleExhausted(HullMarginError, RuntimeError):
    pass


class DegenerateReference(HullMarginError, ValueError):
    pass


class SeparabilityViolated(HullMarginError, RuntimeError):
    pass


class BudgetExceeded(HullMarginError, RuntimeError):
    pass


class RecursionDepthExceeded(HullMarginError, RuntimeError):
    pass


class NotPositive(HullMarginError, ValueError):
    pass


class GenerationFailed(HullMarginError, RuntimeError):
    pass


class InvalidGamma(HullMarginError, ValueError):
    pass


class InvalidBits(HullMarginError, ValueError):
    pass
