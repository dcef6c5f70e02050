"""Exception and warning types raised across the package."""


class OrdinalError(Exception):
    """Base class for every error raised by ordinal_bst."""


class InvalidStateCountError(OrdinalError, ValueError):
    pass


class InvalidStateError(OrdinalError, ValueError):
    pass


class InvalidCodeError(OrdinalError, ValueError):
    pass


class ShapeError(OrdinalError, ValueError):
    pass


class EmptySequenceError(OrdinalError, ValueError):
    pass


class EmptyInputError(OrdinalError, ValueError):
    pass


class DataError(OrdinalError, ValueError):
    """Malformed or unusable input data (empty file, non-finite values...)."""


class SchemaError(DataError):
    """Missing columns or inconsistent feature layout."""


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class LabelError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class InvalidDatasetError(DataError):
    pass


class ConfigError(OrdinalError, ValueError):
    pass


class TrainingDivergedError(OrdinalError, RuntimeError):
    def __init__(self, message, epoch):
        super().__init__(message)
        self.epoch = epoch


class DegenerateDistributionWarning(UserWarning):
    """All retained probability mass underflowed; a uniform fallback was used."""


class DegenerateKappaWarning(UserWarning):
    """Expected disagreement is zero; kappa reported as 1 by convention."""


class NonCompressiveProjectionWarning(UserWarning):
    """Hidden size is not smaller than the number of features."""
