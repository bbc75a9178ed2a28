"""Exception hierarchy shared by the library and the CLI."""


class LowRankSplitError(Exception):
    """Base class for all errors raised by this package."""


class InputError(LowRankSplitError, ValueError):
    """Malformed matrix, shape mismatch or out-of-range parameter."""


class CapabilityError(LowRankSplitError, NotImplementedError):
    """The requested combination (k, gauge, problem variant) is not supported."""


class ConfigError(LowRankSplitError, ValueError):
    """Invalid solver or experiment configuration."""


class NumericalError(LowRankSplitError, ArithmeticError):
    """Iterates became non-finite or a factorization failed."""
