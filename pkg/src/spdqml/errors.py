"""Exception hierarchy shared by every module."""


class SpdqmlError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SpdqmlError, ValueError):
    pass


class InvalidParameterError(SpdqmlError, ValueError):
    pass


class DegenerateStateError(SpdqmlError, ValueError):
    """A projected sample has (near) zero norm and cannot be encoded."""

    def __init__(self, message, sample_index=None):
        if sample_index is not None:
            message = f"sample {sample_index}: {message}"
        super().__init__(message)
        self.sample_index = sample_index


class NumericalError(SpdqmlError, ArithmeticError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class ResourceError(SpdqmlError):
    pass


class ParseError(SpdqmlError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(SpdqmlError, ValueError):
    pass


class ShapeError(SpdqmlError, ValueError):
    pass


class CheckpointVersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class DivergenceError(SpdqmlError, ArithmeticError):
    def __init__(self, message, epoch):
        super().__init__(message)
        self.epoch = epoch
