# Description: Custom exceptions for pyhydro


class HydroError(Exception):
    pass


class BundleLoadError(HydroError):
    pass


class ValidationError(HydroError):
    pass


class ConfigurationError(HydroError):
    pass


class NumericalError(HydroError):
    def __init__(self, message, epoch=None, cls=None, layer=None, residuals=None):
        super().__init__(message)
        self.epoch = epoch
        self.cls = cls
        self.layer = layer
        self.residuals = residuals


class DomainError(NumericalError):
    pass


class UnsupportedOperationError(NumericalError):
    pass


class EvaluationError(HydroError):
    pass


class SamplingError(EvaluationError):
    pass
