"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Array shapes do not agree."""


class SingularMatrixError(ValueError):
    """A Gram matrix is rank deficient or too badly conditioned to invert."""

    def __init__(self, message, columns=None):
        super().__init__(message)
        self.columns = columns


class DegenerateGeometryError(ValueError):
    """A user's channel lies entirely inside the nulled subspace."""


class ConfigError(ValueError):
    pass


class IllPosedError(ValueError):
    pass


class TraceParseError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class TrainingDivergedError(RuntimeError):
    pass
