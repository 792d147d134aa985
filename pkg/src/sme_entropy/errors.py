"""Exception hierarchy."""


class SMEEntropyError(Exception):
    """Base class for all package errors."""


class StateValidationError(SMEEntropyError, ValueError):
    """A matrix failed one of the density-matrix invariants."""


class NonFiniteError(StateValidationError):
    pass


class NonHermitianError(StateValidationError):
    pass


class NonUnitTraceError(StateValidationError):
    pass


class NegativeEigenvalueError(StateValidationError):
    pass


class DimensionMismatchError(SMEEntropyError, ValueError):
    pass


class SanitizeAbort(SMEEntropyError, RuntimeError):
    """Pre-sanitize negativity exceeded the abort threshold (dt too large)."""

    def __init__(self, negativity, threshold, step=None):
        self.negativity = float(negativity)
        self.threshold = float(threshold)
        self.step = step
        where = "" if step is None else f" at step {step}"
        super().__init__(
            f"state negativity {self.negativity:.3e} exceeds abort threshold "
            f"{self.threshold:.3e}{where}; reduce dt"
        )


class ConfigError(SMEEntropyError, ValueError):
    pass
