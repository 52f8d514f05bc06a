"""Exception hierarchy shared by all modules."""


class DLCError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DLCError, ValueError):
    """An argument lies outside the domain of the operation."""


class EmptySupport(DomainError):
    pass


class NegativeProbability(DomainError):
    pass


class MassNotOne(DomainError):
    pass


class InvalidProbability(DomainError):
    pass


class InvalidParams(DomainError):
    pass


class TruncationTooSmall(DomainError):
    pass


class MismatchedTruncation(DomainError):
    pass


class NotConservative(DomainError):
    pass


class NotGrowing(DomainError):
    pass


class OutsideRegion(DomainError):
    pass


class NotBalanced(DomainError):
    pass


class SingularDenominator(DomainError):
    pass


class ZeroMean(DomainError):
    pass


class TailOverflow(DLCError, RuntimeError):
    """Truncated density lost more than the allowed mass beyond ``K``."""


class MaxIterExceeded(DLCError, RuntimeError):
    pass


class CharacteristicEscape(DLCError, RuntimeError):
    """A characteristic curve left ``[0, 1]`` by more than the clamp tolerance."""


class ConfigError(DLCError, ValueError):
    pass
