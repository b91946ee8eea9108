"""
Exception types raised across prune-lab.

Each error subclasses the builtin a caller would naturally catch
(ValueError for bad inputs, RuntimeError for failed computations).
"""


class PruneLabError(Exception):
    """Base class for all prune-lab errors."""


class ShapeError(PruneLabError, ValueError):
    """Tensor dimensions do not line up."""


class NumericError(PruneLabError, RuntimeError):
    """A non-finite value appeared in a computation."""

    def __init__(self, message: str, layer: int = None):
        super().__init__(message)
        self.layer = layer


class DegenerateInputError(PruneLabError, ValueError):
    """Input has zero norm or is otherwise unusable."""


class DegenerateBatchError(PruneLabError, ValueError):
    """A contrastive batch contains an anchor without positives."""


class PreconditionError(PruneLabError, ValueError):
    """A documented precondition of an operation was violated."""


class ParameterError(PruneLabError, ValueError):
    """An argument is outside its valid range."""


class ParseError(PruneLabError, ValueError):
    """An input file could not be parsed."""

    def __init__(self, message: str, line: int = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainingError(PruneLabError, RuntimeError):
    """Training diverged or could not proceed."""

    def __init__(self, message: str, step: int = None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class DegenerateLayerError(PruneLabError, ValueError):
    """Pruning would leave a tensor without surviving weights."""


class DegenerateRepresentationError(PruneLabError, ValueError):
    """Representation is zero or constant, Q-Score is undefined."""


class CohortError(PruneLabError, ValueError):
    """Two model cohorts do not cover the same samples."""

    def __init__(self, message: str, ids=None):
        self.ids = sorted(ids) if ids is not None else []
        if self.ids:
            shown = ", ".join(str(i) for i in self.ids[:20])
            more = "" if len(self.ids) <= 20 else f" (+{len(self.ids) - 20} more)"
            message = f"{message}: {shown}{more}"
        super().__init__(message)


class ProtocolError(PruneLabError, RuntimeError):
    """The experiment protocol is incomplete (e.g. no dense cohort)."""


class CorruptCheckpointError(PruneLabError, ValueError):
    """Checkpoint magic, version, length or checksum is wrong."""


class ConfigError(PruneLabError, ValueError):
    """Experiment configuration is invalid."""
