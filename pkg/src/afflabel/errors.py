"""Exception hierarchy for the affordance labeling engine."""


class AffLabelError(Exception):
    """Base class for all engine errors."""


class DataError(AffLabelError):
    """A file or in-memory structure violates an interchange contract."""


class FormatError(DataError):
    """Malformed file: bad header, wrong dtype, wrong shape."""


class ValidationError(DataError):
    """Well-formed input that violates an invariant (ids, labels, counts)."""


class UnknownLabelError(ValidationError):
    """A label name does not resolve against the catalog (or its aliases)."""


class DimensionMismatchError(ValidationError):
    """Feature dimension disagrees between a model and the vectors scored."""


class NumericalError(AffLabelError):
    """A numerical routine failed or received degenerate input."""
