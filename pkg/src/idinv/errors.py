"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An input violates a documented precondition."""


class DegenerateMaskError(InvalidArgumentError):
    """A mask has no support (all weights zero)."""


class TrainingFailure(RuntimeError):
    """A training loop diverged (non-finite loss or gradient)."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class InversionFailure(RuntimeError):
    """Latent optimization produced a non-finite objective."""

    def __init__(self, message, step=None, trace=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step
        self.trace = list(trace) if trace else []


class MetricFailure(RuntimeError):
    """A metric could not be computed reliably (e.g. matrix sqrt blew up)."""


class CheckpointError(RuntimeError):
    """Base class for checkpoint bundle problems."""


class UnsupportedVersionError(CheckpointError):
    """Bundle was written by an incompatible format version."""


class CorruptionError(CheckpointError):
    """Bundle contents do not match their manifest."""


class NotFoundError(FileNotFoundError):
    """A referenced path, checkpoint or boundary does not exist."""
