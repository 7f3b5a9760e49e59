"""Exception hierarchy shared across the toolkit.

Data/format problems (bad files, bad schemas, unresolvable names) derive
from DataError so the CLI can map them to a single exit code.
"""


class KgunravelError(Exception):
    """Base class for all toolkit errors."""


class DataError(KgunravelError):
    """A problem with user-supplied data or files."""


class TripleParseError(DataError):
    """Malformed line in a TSV triple file."""

    def __init__(self, path, line_number, message):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = path
        self.line_number = line_number


class EmptyGraphError(DataError):
    """Triple file contained no triples."""


class SchemaError(DataError):
    """Query document does not match the JSON schema."""


class BindingError(DataError):
    """Constant or relation name cannot be resolved against a graph."""


class UnsupportedShapeError(KgunravelError):
    """Operation received a query outside its supported shape class."""


class DisconnectedQueryError(UnsupportedShapeError):
    """Query graph is not connected."""


class DepthLimitError(KgunravelError):
    """Requested unraveling depth exceeds the configured safety cap."""


class PredictorError(KgunravelError):
    """Link predictor cannot score a requested relation or entity."""


class ExhaustionError(KgunravelError):
    """Workload sampling gave up after the configured number of attempts."""

    def __init__(self, message, attempts):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class DivergenceError(KgunravelError):
    """Training loss became non-finite."""

    def __init__(self, epoch):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


class UndefinedCorrelationError(KgunravelError):
    """Rank correlation is undefined (constant input)."""


class InternalError(KgunravelError):
    """An internal invariant was violated; indicates a bug."""
