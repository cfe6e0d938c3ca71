"""Exception hierarchy shared by every module."""


class PNeuronError(Exception):
    """Base class for all errors raised by this package."""


class SeedError(PNeuronError, ValueError):
    pass


class ConfigurationError(PNeuronError, ValueError):
    pass


class DeviceModelError(PNeuronError, ValueError):
    pass


class RegistrationError(PNeuronError, ValueError):
    pass


class InsufficientDataError(PNeuronError, ValueError):
    pass


class StateError(PNeuronError, ValueError):
    pass


class DomainError(PNeuronError, ValueError):
    pass


class ArgumentError(PNeuronError, ValueError):
    pass


class DegenerateCurveError(PNeuronError, ValueError):
    pass


class CapacityError(PNeuronError, ValueError):
    pass


class FitError(PNeuronError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
