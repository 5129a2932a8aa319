"""Exception hierarchy. ``ValidationError`` maps to CLI exit 1, ``CamlensIOError`` to exit 2."""


class CamlensError(Exception):
    pass


class ValidationError(CamlensError, ValueError):
    """Bad input values, shapes or parameters."""


class CamlensIOError(CamlensError, OSError):
    """A file could not be read, decoded or written."""


class ImageDecodeError(CamlensIOError):
    pass


class DatasetError(ValidationError):
    pass


class RegistrationError(ValidationError):
    pass


class InsufficientFeaturesError(RegistrationError):
    pass


class UnreliableEstimateError(RegistrationError):
    pass


class SingularFitError(ValidationError):
    pass


class CheckpointError(CamlensIOError):
    pass


class StaleCacheError(CamlensError, RuntimeError):
    pass


class DivergenceError(CamlensError, FloatingPointError):
    pass
