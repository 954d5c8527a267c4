"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Bad scenario configuration: parse failure or invariant violation."""


class BackendError(RuntimeError):
    """A convex-solver backend failed or returned an unusable status."""


class BudgetExceeded(RuntimeError):
    """An exhaustive oracle was asked for more work than its safety cap."""


class ValidationFailure(AssertionError):
    """A validation suite check did not pass."""
