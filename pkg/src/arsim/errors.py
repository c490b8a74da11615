"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or out-of-range input data."""


class ConfigError(InputError):
    """Invalid configuration; ``key`` names the offending setting."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class FeasibilityError(RuntimeError):
    """A routing request violates capacity or tolerance limits."""


class ContractViolation(AssertionError):
    """An internal precondition failed; indicates a bug in the caller."""


class NumericError(ArithmeticError):
    """Non-finite values appeared during training."""


class StateError(RuntimeError):
    """An object was used in a state that does not support the call."""


class ConsistencyError(RuntimeError):
    """Bookkeeping between two structures diverged."""
