"""Exception hierarchy shared by every module."""


class SamplerForgeError(Exception):
    """Base class for all errors raised by sampler_forge."""


class TapeExhausted(SamplerForgeError):
    """A draw would read past the end of a seed tape."""


class DegreeMismatch(SamplerForgeError, ValueError):
    pass


class LengthMismatch(SamplerForgeError, ValueError):
    pass


class BadSeedLength(SamplerForgeError, ValueError):
    pass


class SpecInvalid(SamplerForgeError, ValueError):
    pass


class SOutOfRange(SpecInvalid):
    """Trade-off parameter s lies outside the admissible interval."""


class BudgetExceeded(SamplerForgeError):
    """An exhaustive computation would exceed the configured work budget."""


class IndexOutOfRange(SamplerForgeError, IndexError):
    pass


class DomainMismatch(SamplerForgeError, ValueError):
    pass


class InnerNotStrong(SamplerForgeError, ValueError):
    pass


class NotStrong(SamplerForgeError, ValueError):
    pass


class AlphaInfeasible(SamplerForgeError, ValueError):
    pass


class NoConvergence(SamplerForgeError, ArithmeticError):
    pass


class BadQ(SamplerForgeError, ValueError):
    pass


class BadP(SamplerForgeError, ValueError):
    pass


class NotNormalized(SamplerForgeError, ValueError):
    pass


class DomainNotBinary(SamplerForgeError, ValueError):
    pass


class BadRadius(SamplerForgeError, ValueError):
    pass
