"""Exception hierarchy shared by all dictopt modules."""


class DictOptError(Exception):
    """Base class for all errors raised by dictopt."""


class ContractError(DictOptError, ValueError):
    """An argument violates a documented precondition (shape, range, ...)."""


class NumericFailure(DictOptError, ArithmeticError):
    """A numerical routine failed to converge or produced non-finite values.

    Parameters
    ----------
    message : str
        Human readable description.
    iterations : int, optional
        Iteration count reached when the failure was detected, if known.
    index : int, optional
        Offending index (basis function, sample, ...) if known.
    """

    def __init__(self, message, iterations=None, index=None):
        super().__init__(message)
        self.iterations = iterations
        self.index = index


class DivergedError(DictOptError, RuntimeError):
    """An optimizer run diverged; ``history`` holds the records up to that point."""

    def __init__(self, message, iteration, history=None):
        super().__init__(message)
        self.iteration = iteration
        self.history = history if history is not None else []


class BlowUpError(DictOptError, RuntimeError):
    """A simulation produced a non-finite state."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class ConfigurationError(DictOptError, ValueError):
    """An experiment or solver configuration is invalid."""


class DegenerateModelError(DictOptError, RuntimeError):
    """Sparsification eliminated every term of a model."""


class LoadError(DictOptError, ValueError):
    """A persisted file could not be read."""


class SchemaVersionError(LoadError):
    """The file was written with an unsupported schema version."""


class MalformedFileError(LoadError):
    """The document structure is invalid.

    ``line`` is the 1-based line number for text formats, when known.
    """

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class NonFiniteValueError(LoadError):
    """A persisted numeric field is NaN or infinite."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class UnknownFamilyError(LoadError):
    """A dictionary spec names a basis family that does not exist."""

    def __init__(self, tag):
        super().__init__(f"unknown basis family tag {tag!r}")
        self.tag = tag


class EmptyDatasetError(LoadError):
    """A dataset file contains no samples."""
