"""Exception types raised across the package.

All of them derive from :class:`LLPError`, itself a ``ValueError``, so callers
that only care about "bad input" can catch the base class.
"""


class LLPError(ValueError):
    pass


# data model
class NegativeMass(LLPError):
    pass


class MassNotOne(LLPError):
    pass


class EtaOutOfRange(LLPError):
    pass


class DimensionMismatch(LLPError):
    pass


class HypothesisUndefinedOnSupport(LLPError):
    pass


# bagging / marginals
class BagSizeExceedsData(LLPError):
    pass


class BatchSmallerThanBag(LLPError):
    pass


class EmptySample(LLPError):
    pass


class SingleBagBatch(LLPError):
    pass


class InvalidSplit(LLPError):
    pass


# losses / erm / sgd
class MissingMarginal(LLPError, KeyError):
    pass


class ThetaOutOfRange(LLPError):
    pass


class EmptyHypothesisClass(LLPError):
    pass


class NonPositiveBound(LLPError):
    pass


# oracles / bench
class EnumerationTooLarge(LLPError):
    pass


class InsufficientData(LLPError):
    pass


class PreconditionViolated(LLPError):
    """A precondition guard of a guarantee failed (the CLI maps this to exit code 3)."""
