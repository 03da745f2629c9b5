"""Exception hierarchy."""


class FirstDetectError(Exception):
    """Base class for all package errors."""


class NumericalError(FirstDetectError):
    """A numerical routine could not deliver a trustworthy result."""


class NotHermitian(NumericalError, ValueError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class DefectiveMatrix(NumericalError):
    """Raised when an eigendecomposition does not reconstruct its input."""


class EmptySet(FirstDetectError, ValueError):
    pass


class InvalidSize(FirstDetectError, ValueError):
    pass


class DimensionOverflow(FirstDetectError, ValueError):
    pass


class AsymmetricInteraction(FirstDetectError, ValueError):
    pass


class InvalidGram(FirstDetectError, ValueError):
    pass


class ZeroNorm(NumericalError):
    pass


class EmptyParallelSpace(FirstDetectError, ValueError):
    pass


class InsufficientSamples(FirstDetectError, ValueError):
    pass


class NoDivergence(NumericalError):
    pass


class ConfigError(FirstDetectError, ValueError):
    """Invalid sweep configuration. ``errors`` maps field names to messages."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = {"config": errors}
        self.errors = dict(errors)
        msg = "; ".join(f"{k}: {v}" for k, v in self.errors.items())
        super().__init__(msg)
