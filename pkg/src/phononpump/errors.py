"""Exception hierarchy shared by the engine and the CLI."""


class PhononPumpError(Exception):
    """Base class for all engine errors."""


class InvalidArgumentError(PhononPumpError, ValueError):
    pass


class DegenerateGroundStateError(PhononPumpError):
    pass


class OrderingError(PhononPumpError):
    """Dressed operators cannot be ordered because of near-degenerate levels."""


class AccuracyError(PhononPumpError):
    """Integrator exceeded its accuracy budget (e.g. norm drift)."""


class CutoffLeakError(PhononPumpError):
    """Population reached the top level of a truncated Fock space."""


class DivergenceError(PhononPumpError):
    """No steady state exists for the requested parameters."""


class ConvergenceError(PhononPumpError):
    pass


class ConfigError(PhononPumpError, ValueError):
    """Experiment configuration failed validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
