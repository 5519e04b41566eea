"""Exception types shared across the dispute simulator."""


class DisputeError(Exception):
    """Base class for all simulator errors."""


class StepPastEnd(DisputeError):
    """State transition requested past the final step of the computation."""


class HeightOutOfRange(DisputeError):
    """Tree height outside the supported range."""


class IndexOutOfRange(DisputeError):
    """Leaf or subtree index outside the committed range."""


class NonDivisibleGrace(DisputeError):
    """Grace period does not divide the censorship budget exactly."""


class InvalidParam(DisputeError):
    """Time or size parameter violates a basic constraint."""


class ClockNotRunning(DisputeError):
    """Tick requested on a stopped chess clock."""


class BudgetExhausted(DisputeError):
    """Censorship spend exceeds the remaining budget."""


class IdenticalClaims(DisputeError):
    """A match requires two distinct commitment roots."""


class NotRunning(DisputeError):
    """Action submitted to a match that already ended."""


class WrongHeight(DisputeError):
    """Bisect submitted at leaf level (or step above leaf level)."""


class NotAtLeaf(DisputeError):
    """Step action submitted before the bisection reached a leaf."""


class WitnessHashMismatch(DisputeError):
    """Step witness state does not bind to the last agreed-upon leaf."""


class SearchSpaceTooLarge(DisputeError):
    """Exhaustive search requested outside the tractable parameter box."""


class InsufficientSamples(DisputeError):
    """Curve fit requires at least three samples above the N cutoff."""


class AlphaOutOfDomain(DisputeError):
    """Lambert-W argument left the (-1/e, 0) branch domain."""


class PreconditionViolated(DisputeError):
    """Numeric check called outside its stated precondition."""


class ConfigError(DisputeError):
    """Malformed or unknown configuration input."""
