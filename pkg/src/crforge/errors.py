"""Exception hierarchy shared by all crforge modules."""


class CrforgeError(Exception):
    """Base class for all library errors."""


class ValidationError(CrforgeError, ValueError):
    """Input failed a documented precondition."""


class TailNotConvergent(CrforgeError):
    """A series over a countable alphabet did not certify its tail in time."""


class ArityMismatch(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class NonStochasticMatrix(ValidationError):
    pass


class NotMarkov(ValidationError):
    pass


class ExactTooLarge(CrforgeError):
    """Exhaustive enumeration requested beyond its size cap."""


class RateConditionViolated(ValidationError):
    pass


class ResourceLimitError(CrforgeError):
    """A computation would exceed a configured memory or size cap."""


class CodebookTooLarge(ResourceLimitError):
    def __init__(self, message, max_feasible_n=None):
        super().__init__(message)
        self.max_feasible_n = max_feasible_n


class TooLarge(ResourceLimitError):
    pass


class MismatchedInstances(ValidationError):
    pass
