"""Exception types shared across the package."""


class EtseekError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(EtseekError):
    pass


class StepSizeInvalid(EtseekError):
    pass


class NonFiniteState(EtseekError):
    pass


class InitialOutsideDomain(EtseekError):
    pass


class NoCrossingFound(EtseekError):
    pass


class ZenoSuspected(EtseekError):
    """Raised when the inter-jump flow time drops below the Zeno guard.

    The partially-built arc is attached so callers can inspect how far the
    simulation got before the guard tripped.
    """

    def __init__(self, message, partial_arc=None):
        super().__init__(message)
        self.partial_arc = partial_arc


class DitherInvalid(EtseekError):
    pass


class MinimizerUnknown(EtseekError):
    pass


class InsufficientDomain(EtseekError):
    pass


class ConfigInvalid(EtseekError):
    pass
