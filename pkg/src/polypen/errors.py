"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PolypenError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(PolypenError):
    """Operands have incompatible shapes."""


class NotPositiveDefinite(PolypenError):
    """A matrix required to be (semi)definite failed the factorization check."""


class RankDeficientBasis(PolypenError):
    """Vectors passed as a basis are linearly dependent."""


class InvalidPenalty(PolypenError):
    """Penalty parameters violate their constraints (signs, monotonicity, scale)."""


class InvalidPattern(PolypenError):
    """A pattern encoding is malformed or inconsistent with the penalty variant."""


class InvalidResponse(PolypenError):
    """Response values are outside the loss family's domain."""


class NoClosedForm(PolypenError):
    """No analytic moment formula exists for this loss/evaluation point."""


class SingularEstimate(PolypenError):
    """A Monte-Carlo moment estimate is numerically singular."""


class NotConverged(PolypenError):
    """The solver exhausted its iteration budget without certifying optimality."""


class SeparableData(PolypenError, UserWarning):
    """Logistic fit diverged: the data admit an unbounded direction.

    Doubles as a warning category: fits flag divergence on the report and
    emit this instead of raising, so Monte Carlo sweeps can keep going.
    """


class InvalidScenario(PolypenError):
    """Scenario parameters are mutually inconsistent (dims, noise/loss pairing)."""


class NoConvergedReplications(PolypenError):
    """Every replication failed; aggregate metrics are undefined."""


class ConfigError(PolypenError):
    """Experiment configuration failed validation."""
