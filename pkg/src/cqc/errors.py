"""Exception hierarchy shared by the analysis modules."""

from __future__ import annotations


class CQCError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(CQCError, ValueError):
    """An input value lies outside its allowed range."""


class InvalidConfigurationError(CQCError, ValueError):
    """A (p, q, path, detector) combination that the protocol never produces."""


class StrategyError(CQCError, ValueError):
    """An attack strategy failed validation.

    The individual violations are kept on ``violations``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = ", ".join(str(v) for v in self.violations)
        super().__init__(f"invalid attack strategy: {lines}")


class DegenerateCaseError(CQCError, ValueError):
    """A case has no single-click mass left to renormalize."""


class DomainError(CQCError, ValueError):
    pass


class UndefinedQBERError(CQCError, ZeroDivisionError):
    """QBER requested with no key-generating (E1) events."""


class InconsistentObservablesError(CQCError, ValueError):
    """Observables that no intercept-resend strategy can produce."""


class DarkCountRegimeError(CQCError, ValueError):
    """Dark counts swamp the key events; the corruption bound is undefined."""


class SingularityError(CQCError, ZeroDivisionError):
    pass
