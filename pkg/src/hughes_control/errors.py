"""Exception hierarchy shared by all solvers."""


class HughesError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(HughesError, ValueError):
    pass


class ConfigError(HughesError):
    """Scenario validation failed; ``errors`` lists every violated rule."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.errors))


class SolverError(HughesError):
    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (relative residual {residual:.3e})"
        super().__init__(message)


class StepSizeError(HughesError):
    pass


class InvariantViolation(HughesError):
    pass


class DegenerateMassError(HughesError):
    pass


class IntegrationError(HughesError):
    pass


class StepFailure(HughesError):
    """A component failed inside the forward time loop."""

    def __init__(self, step, cause, diagnostics=None):
        self.step = step
        self.cause = cause
        self.diagnostics = diagnostics or {}
        super().__init__(f"forward solve failed at step {step}: {cause}")


class OptimizationFailure(HughesError):
    """Forward failure inside the optimizer; carries the offending iterate."""

    def __init__(self, message, iterate=None, history=None):
        self.iterate = iterate
        self.history = history if history is not None else []
        super().__init__(message)
