"""Exception types shared across the package."""


class NumericDegenerateError(ArithmeticError):
    """A normalisation term vanished (non-COLA framing, silent reference, ...)."""


class UndefinedMetricError(ValueError):
    """The metric has no frames to be computed over."""


class InvalidStateError(RuntimeError):
    """Cached forward intermediates do not match the parameters."""


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, name: str):
        super().__init__(f"non-finite gradient in tensor {name!r}")
        self.name = name


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, total: float):
        super().__init__(f"total loss {total:.4g} exceeded divergence guard at step {step}")
        self.step = step
        self.total = total


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    def __init__(self, msg: str, tensor: str | None = None):
        super().__init__(msg)
        self.tensor = tensor


class DuplicateTensorError(CheckpointError):
    pass


class WavFormatError(ValueError):
    pass
