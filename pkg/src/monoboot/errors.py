"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class MonobootError(Exception):
    """Base class for every error raised by the package."""


class InsufficientPoints(MonobootError, ValueError):
    """A hull needs at least two evaluation points."""


class UnsortedInput(MonobootError, ValueError):
    """Abscissae must be strictly increasing."""


class OutOfDomain(MonobootError, ValueError):
    """Query point lies outside the range covered by a hull."""


class AboveRange(MonobootError, ValueError):
    """Generalized inverse requested above the supremum of the function."""


class InvalidSwitchInstance(MonobootError, ValueError):
    """Switch-relation preconditions are violated."""


class BoundaryEvaluation(MonobootError, ValueError):
    """The evaluation point maps to the boundary of the transformed domain."""


class EmptyData(MonobootError, ValueError):
    """No observations were supplied."""


class DuplicateAbscissae(MonobootError, ValueError):
    """Tied design points were found and tie handling was disabled."""


class SingularCoefficientSystem(MonobootError, ValueError):
    """The bias-reduction coefficient system cannot be solved."""


class StepOutOfDomain(MonobootError, ValueError):
    """A numerical-derivative offset leaves the domain of the estimate."""


class IncompleteDEstimates(MonobootError, ValueError):
    """A derivative estimate needed by the perturbation is missing."""


class ZeroBiasConstant(MonobootError, ValueError):
    """The leading bias constant vanishes so the optimal step is undefined."""


class RotFitFailed(MonobootError, ValueError):
    """The reference-model fit behind the rule-of-thumb step degenerated.

    Attributes
    ----------
    fallback : float
        Step size the caller may use instead.
    """

    def __init__(self, message: str, fallback: float):
        super().__init__(message)
        self.fallback = fallback


class EmptyDraws(MonobootError, ValueError):
    """No bootstrap draws were supplied."""


class BadSubsampleSize(MonobootError, ValueError):
    """Subsample size must satisfy 1 <= m <= n."""


class ReplicationFailed(MonobootError, RuntimeError):
    """A Monte Carlo replication raised and strict mode was requested."""
