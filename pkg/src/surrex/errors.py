"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """Input, config, or file content violates a declared contract.

    Carries an itemized list of violations so callers can report all
    problems at once instead of failing on the first.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations else [message]

    def __str__(self):
        base = super().__str__()
        if len(self.violations) > 1:
            return base + "\n  - " + "\n  - ".join(self.violations)
        return base


class NumericalError(RuntimeError):
    """A numerical routine failed beyond its recovery policy (e.g. Cholesky)."""
