from typing import Optional


class DimensionError(ValueError):
    """
    Raised if the shapes of two matrices do not fit together.
    """

    pass


class ConfigError(ValueError):
    """
    Raised if a configuration value is out of its valid range (e.g. layer index, leaky slope).
    """

    pass


class StateError(RuntimeError):
    """
    Raised if an operation is called on an object in the wrong state (e.g. stale forward cache, missing domain head).
    """

    pass


class LabelError(ValueError):
    """
    Raised if a class label is outside the range of the classifier.
    """

    pass


class DataError(ValueError):
    """
    Raised if a dataset does not satisfy the requirements of an operation (e.g. labeled target data for adaptation).
    """

    pass


class NumericError(ArithmeticError):
    """
    Raised if a non-finite value (NaN or Inf) appears in a matrix.
    """

    pass


class OracleInvalidError(RuntimeError):
    """
    Raised if the loss closure handed to the finite difference oracle is not deterministic.
    """

    pass


class FormatError(ValueError):
    """
    Raised if a stored file is malformed. The byte offset of the defect is kept in the attribute offset.
    """

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super(FormatError, self).__init__(message)


class IntegrityError(ValueError):
    """
    Raised if stored features and labels disagree in length.
    """

    pass


class DivisionError(ZeroDivisionError):
    """
    Raised if a relative error reduction is requested for a baseline error of zero.
    """

    pass


class EndOfEpoch(StopIteration):
    """
    Signals that a batch iterator visited every frame of the current epoch.
    """

    pass
