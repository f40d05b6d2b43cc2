"""Estimation-quality and pattern-recovery metrics.

All aggregation here is a pure, single-threaded reduce over replication
results; anything parallel happens upstream where the results are produced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .asymptotics import PatternDistribution
from .errors import InvalidPattern, NoConvergedReplications
from .numerics import RngStream, projector
from .penalty import Pattern, PenaltySpec, pattern, pattern_basis

__all__ = [
    "ReplicationResult",
    "RecoveryRate",
    "rmse",
    "residual_errors",
    "recovery_rate",
    "tv_distance",
    "empirical_pattern_distribution",
]

# Silent exclusion of failed fits would bias every curve; above this share
# of non-converged replications the aggregate refuses to exist.
_EXCLUSION_LIMIT = 0.01


@dataclass(frozen=True)
class ReplicationResult:
    """One fitted replication: the estimate, its pattern, the scaled error
    u_n = sqrt(n) * (theta_hat - theta0), and whether the solve certified."""

    theta_hat: np.ndarray
    pattern: Pattern
    u_n: np.ndarray
    converged: bool

    def __post_init__(self) -> None:
        theta_hat = np.asarray(self.theta_hat, dtype=float)
        u_n = np.asarray(self.u_n, dtype=float)
        object.__setattr__(self, "theta_hat", theta_hat)
        object.__setattr__(self, "u_n", u_n)
        if self.converged and not np.all(np.isfinite(u_n)):
            raise InvalidPattern("a converged replication must have a finite error")


def _converged_subset(results: Sequence[ReplicationResult]) -> list[ReplicationResult]:
    total = len(results)
    kept = [r for r in results if r.converged]
    if not kept:
        raise NoConvergedReplications("no converged replications to aggregate")
    excluded = total - len(kept)
    if excluded > _EXCLUSION_LIMIT * total:
        raise NoConvergedReplications(
            f"{excluded} of {total} replications failed to converge; "
            "more than 1% exclusions would bias the aggregate"
        )
    return kept

def rmse(results: Sequence[ReplicationResult]) -> float:
    """Root mean squared scaled error, sqrt(mean ||u_n||^2), over converged
    replications.  Refuses to aggregate when more than 1% were excluded."""
    kept = _converged_subset(results)
    return math.sqrt(float(np.mean([r.u_n @ r.u_n for r in kept])))


def residual_errors(u, pen: PenaltySpec, theta0) -> tuple[float, float]:
    """Residual error of a scaled estimation error, and its share.

    RE is the squared norm of the component of `u` orthogonal to the span of
    all vectors sharing theta0's pattern; RRE divides by ||u||^2 (zero error
    counts as a full recovery, RRE = 0).  RRE is scale invariant and zero
    exactly when u lies in the pattern space.
    """
    u = np.asarray(u, dtype=float)
    theta0 = np.asarray(theta0, dtype=float)
    basis = pattern_basis(pen, pattern(pen, theta0))
    P = projector(list(basis.T), dim=theta0.size)
    resid = u - P @ u
    re = float(resid @ resid)
    total = float(u @ u)
    if total == 0.0:
        return 0.0, 0.0
    rre = re / total
    # clip float dust so the ratio honors its [0, 1] contract exactly
    return re, min(max(rre, 0.0), 1.0)


@dataclass(frozen=True)
class RecoveryRate:
    """Fraction of replications whose fitted pattern matched the truth."""

    rate: float
    se: float
    count: int


def recovery_rate(
    results: Sequence[ReplicationResult], pen: PenaltySpec, theta0
) -> RecoveryRate:
    """Share of all replications (converged or not) recovering pattern(theta0),
    with the binomial standard error of that share."""
    if not results:
        raise NoConvergedReplications("recovery rate needs at least one replication")
    target = pattern(pen, np.asarray(theta0, dtype=float))
    hits = sum(1 for r in results if r.pattern == target)
    n = len(results)
    rate = hits / n
    return RecoveryRate(rate, math.sqrt(rate * (1.0 - rate) / n), n)


def tv_distance(a: PatternDistribution, b: PatternDistribution) -> float:
    """Total variation distance between two pattern laws: half the L1 gap
    over the union of their supports.  Requires a common penalty variant so
    the patterns are comparable at all."""
    variants = {p.variant for p in a.support} | {p.variant for p in b.support}
    if len(variants) > 1:
        raise InvalidPattern(f"pattern laws mix penalty variants {sorted(variants)}")
    union = set(a.support) | set(b.support)
    gap = sum(abs(a.probability(p) - b.probability(p)) for p in union)
    return min(0.5 * gap, 1.0)


def empirical_pattern_distribution(
    patterns: Sequence[Pattern], stream: RngStream, *, failures: int = 0
) -> PatternDistribution:
    """Package observed patterns (e.g. of fitted replications) as a
    distribution comparable with the limiting one."""
    counts: dict[Pattern, int] = {}
    for pat in patterns:
        counts[pat] = counts.get(pat, 0) + 1
    cells = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0].encode())))
    total = len(patterns) + failures
    return PatternDistribution(cells, total, len(patterns), failures, stream)
