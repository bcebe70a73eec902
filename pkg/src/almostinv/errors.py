"""Exception types raised across the package.

Everything derives from :class:`AlmostInvError` so callers can catch the
whole family at once; the scenario runner relies on this to turn pipeline
failures into failed reports instead of tracebacks.
"""


class AlmostInvError(Exception):
    """Base class for all package errors."""


class InvalidSpec(AlmostInvError, ValueError):
    """An operator specification is malformed."""


class SingularResolvent(AlmostInvError):
    """``lam*I - A`` is numerically singular."""

    def __init__(self, msg, sigma_min=None, lam=None):
        super().__init__(msg)
        self.sigma_min = sigma_min
        self.lam = lam


class ScheduleExhausted(AlmostInvError):
    """The approach schedule did not yield enough distinct points."""


class FamilyTooShort(AlmostInvError, ValueError):
    pass


class AllCandidatesBounded(AlmostInvError):
    """No candidate functional produced a growing resolvent family."""


class TooFewSelected(AlmostInvError):
    pass


class RankDeficient(AlmostInvError):
    def __init__(self, msg, sigma_min=None):
        super().__init__(msg)
        self.sigma_min = sigma_min


class DefectMismatch(AlmostInvError):
    """The supplied defect data does not reproduce ``TY`` modulo ``Y``."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class BudgetInfeasible(AlmostInvError):
    """The norm budget cannot be met by any admissible tail."""

    def __init__(self, msg, achievable=None):
        super().__init__(msg)
        self.achievable = achievable


class NoDefect(AlmostInvError):
    pass


class BranchUnsupported(AlmostInvError):
    """The requested branch needs machinery that is not available here.

    ``certificate`` carries whatever was computed before giving up, so the
    scaled bridge ``alpha*G`` is still inspectable.
    """

    def __init__(self, msg, certificate=None):
        super().__init__(msg)
        self.certificate = certificate


class HypothesisFailed(AlmostInvError):
    pass


class NotEigenpair(AlmostInvError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class InsufficientEigenpairs(AlmostInvError, ValueError):
    pass


class NoStabilization(AlmostInvError):
    def __init__(self, msg, codims=None, truncation_artifact=False):
        super().__init__(msg)
        self.codims = codims
        self.truncation_artifact = truncation_artifact


class ContourHitsSpectrum(AlmostInvError):
    pass


class QuadratureNotConverged(AlmostInvError):
    pass


class ConfigInvalid(AlmostInvError, ValueError):
    """Scenario configuration failed validation.

    ``errors`` maps dotted field names to messages.
    """

    def __init__(self, errors):
        self.errors = dict(errors)
        lines = "; ".join(f"{k}: {v}" for k, v in sorted(self.errors.items()))
        super().__init__(f"invalid scenario config: {lines}")


class OrbitCollapsed(UserWarning):
    """An orbit vector ``T^k z`` vanished; the orbit is truncated there."""
