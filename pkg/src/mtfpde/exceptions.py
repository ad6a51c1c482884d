class ConfigurationError(ValueError):
    """Invalid problem, mesh or study configuration."""


class NumericalFailure(RuntimeError):
    """A numerical procedure failed; ``step`` is the time level, when known."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step
