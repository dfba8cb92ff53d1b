"""Exception and warning types raised across the pipeline."""


class PriornetError(Exception):
    """Base class for all library errors."""


class ParseError(PriornetError, ValueError):
    pass


class DuplicateGene(ParseError):
    pass


class UnlabeledSample(ParseError):
    pass


class TooFewReplicates(PriornetError, ValueError):
    pass


class DegenerateVariances(PriornetError, ValueError):
    pass


class RankDeficient(PriornetError, ValueError):
    pass


class NotPositiveDefinite(PriornetError, ValueError):
    pass


class EmptyAfterFilter(PriornetError):
    """Raised by the pipeline when filtering leaves no gene."""


class SchemaError(PriornetError, ValueError):
    """An artifact file does not carry the expected columns."""


class EmptyAfterFilterWarning(UserWarning):
    pass


class DataWarning(UserWarning):
    """Recoverable oddity in input data (duplicates, dropped genes, ...)."""
