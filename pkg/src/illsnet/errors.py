"""Exception types shared across the package."""


class NonFiniteInput(ValueError):
    """An input array contains NaN or infinity."""


class DimensionMismatch(ValueError):
    """Array shapes do not agree with the operation's contract."""


class TopologyMismatch(ValueError):
    """Two parameter sets do not share the same layer widths."""


class ParseError(ValueError):
    """A data file row could not be parsed."""


class EmptySeries(ValueError):
    """A series file contains no data rows."""


class DegenerateSeries(ValueError):
    """A series is constant and cannot be rescaled."""


class SeriesTooShort(ValueError):
    """A series has too few points to window."""
