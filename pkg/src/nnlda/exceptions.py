"""Exception hierarchy for nnlda."""


class NNLDAError(Exception):
    """Base class for every error raised by this package."""


class DomainError(NNLDAError, ValueError):
    """A special function was evaluated outside its domain."""


class DimensionMismatch(NNLDAError, ValueError):
    pass


class AllDocumentsEmpty(NNLDAError, ValueError):
    pass


class MissingColumn(NNLDAError, KeyError):
    pass


class MalformedRow(NNLDAError, ValueError):
    def __init__(self, row, reason):
        super().__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason


class NonFiniteGradient(NNLDAError, FloatingPointError):
    """Prior-network gradient contained NaN or inf; training has diverged."""


class SchemaVersionMismatch(NNLDAError, ValueError):
    pass


class CorruptCheckpoint(NNLDAError, ValueError):
    pass


class EmptyEvaluation(NNLDAError, ValueError):
    pass


class MissingGoldLabels(NNLDAError, ValueError):
    pass


class UnknownSideValue(NNLDAError, KeyError):
    pass
