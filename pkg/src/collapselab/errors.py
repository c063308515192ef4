"""Exception types shared across the package."""


class CollapseLabError(Exception):
    """Base class for all package errors."""


class ParameterError(CollapseLabError, ValueError):
    """An argument violates a precondition (shape, range, sign)."""


class SingularityError(CollapseLabError, ArithmeticError):
    """A schedule endpoint makes the requested quantity undefined."""


class DegenerateTailError(CollapseLabError, ArithmeticError):
    """Both neighbor-count distributions are constant; no tail index exists."""


class ConfigError(CollapseLabError, ValueError):
    """An experiment config failed validation; message lists offending keys."""


class CheckpointError(CollapseLabError, ValueError):
    """A checkpoint file is malformed or has an unsupported schema version."""


class StageError(CollapseLabError, RuntimeError):
    """An experiment stage failed; carries the stage name."""

    def __init__(self, stage, message):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
