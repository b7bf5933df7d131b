"""Exception hierarchy shared across the package."""


class SigmaForgeError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(SigmaForgeError):
    """Rejected input: bad values, bad parameters, violated preconditions."""


class InsufficientDataError(SigmaForgeError):
    """Series too short for the requested operation."""


class DegenerateSeriesError(SigmaForgeError):
    """Zero-variance or otherwise degenerate data."""


class ShapeError(SigmaForgeError):
    """Misaligned lengths or incompatible shapes."""


class NonFiniteError(SigmaForgeError):
    """NaN or Inf encountered during evaluation.

    Carries the index and operation tag of the first offending node when the
    error originates in a tape evaluation.
    """

    def __init__(self, message, node_index=None, op_name=None):
        super().__init__(message)
        self.node_index = node_index
        self.op_name = op_name


class SingularDesignError(SigmaForgeError):
    """Rank-deficient or collinear regression design."""


class OptimizationFailedError(SigmaForgeError):
    """No optimizer start converged to a usable solution."""


class TrainingDivergedError(SigmaForgeError):
    """Non-finite training loss persisted after the automatic learning-rate cut."""


class ConfigError(SigmaForgeError):
    """Experiment configuration violates the schema.

    ``field`` holds the dotted path of the offending entry.
    """

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class StageError(SigmaForgeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
