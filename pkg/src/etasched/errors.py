"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input: bad parameters, malformed files, broken invariants.

    CLI maps this to exit code 2.
    """


class InsufficientEnergyError(ValidationError):
    """A consumer asked the capacitor for more energy than it holds."""
