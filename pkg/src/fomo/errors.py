"""Exception taxonomy shared across the package."""


class FomoError(Exception):
    """Base class for all package errors."""


class ConfigError(FomoError):
    """Invalid configuration or design specification."""


class DomainError(FomoError):
    """A point falls outside the supported input domain."""


class DegenerateWeightsError(FomoError):
    """KDE weights are all zero (or otherwise unusable)."""


class InsufficientDataError(FomoError):
    """Too few data points for the requested operation."""


class ModelStateError(FomoError):
    """Operation requires a trained model that is not available."""


class IllConditionedKernelError(FomoError):
    """Kernel matrix could not be factorized even at the maximum jitter.

    Carries the last jitter level attempted (relative to the signal
    variance) in ``jitter``.
    """

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class TrainingDivergedError(FomoError):
    """A network member produced a non-finite loss during training."""

    def __init__(self, message, member=None):
        super().__init__(message)
        self.member = member


class BlowUpError(FomoError):
    """The wave field became non-finite during time integration."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class StabilityError(FomoError):
    """Norm growth indicates an unstable time step."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class UndefinedNormalizationError(FomoError):
    """Normalized MSE is undefined because the reference signal is all zero."""
