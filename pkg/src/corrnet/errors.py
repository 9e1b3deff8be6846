"""Exception hierarchy shared across the package."""


class CorrnetError(Exception):
    """Base class for all errors raised by this package."""


class PcapError(CorrnetError):
    """Capture file cannot be parsed; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DatasetError(CorrnetError):
    """CSV schema, label, or fold-plan problem."""


class StatsError(CorrnetError):
    """A statistic's preconditions are not met for the given column."""


class ClassifierError(CorrnetError):
    """Training or prediction cannot proceed."""


class SelectionError(CorrnetError):
    """Selection inputs are inconsistent (ranking/pair/feature mismatch)."""


class SelectionAbort(CorrnetError):
    """The in-loop accuracy evaluator failed; carries the partial trace."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace
