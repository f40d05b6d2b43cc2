"""Limiting law of the scaled estimation error and what follows from it.

The limiting error u-hat minimizes the random objective
``(1/2) u'Cu - u'W + f'(theta0; u)`` with ``W ~ N(0, C_delta)``.  This module
samples that minimizer, estimates the distribution of its pattern, evaluates
the projected-Gaussian formula for the probability of exact pattern recovery,
certifies irrepresentability by linear programming, and sweeps the penalty
scale.  Every Monte-Carlo loop draws from per-index child streams, so results
are reproducible and independent of scheduling or chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import (
    DimensionMismatch,
    InvalidScenario,
    NotConverged,
    NotPositiveDefinite,
)
from .loss import MomentPair
from .numerics import RngStream, cholesky, projector, sample_gaussian
from .penalty import (
    DirectionalPenalty,
    Pattern,
    PenaltySpec,
    directional,
    limit_pattern,
    pattern,
    pattern_basis,
    subdiff_contains,
    subdiff_ri_point,
)
from .penalty.subdiff import _slope_groups
from .solver import SolveOptions, minimize_limit

__all__ = [
    "LimitLaw",
    "PatternDistribution",
    "RecoveryProbability",
    "IrrepResult",
    "SweepPoint",
    "sample_limit",
    "limit_pattern_distribution",
    "recovery_gaussian",
    "recovery_probability_formula",
    "irrepresentability_check",
    "alpha_sweep_recovery",
]

# Abort threshold: more than this fraction of failed draws invalidates a run.
_FAIL_FRACTION = 1e-3


@dataclass(frozen=True, eq=False)
class LimitLaw:
    """Everything that pins down the limiting error distribution.

    ``theta0`` is the point the error is measured around, ``moments`` carries
    the curvature C (must be positive definite) and the score covariance
    C_delta, and ``penalty`` is the scaled nonsmooth part whose directional
    geometry shapes the limit.
    """

    theta0: np.ndarray
    moments: MomentPair
    penalty: PenaltySpec

    def __post_init__(self) -> None:
        theta0 = np.asarray(self.theta0, dtype=float)
        object.__setattr__(self, "theta0", theta0)
        if theta0.ndim != 1 or theta0.size == 0:
            raise DimensionMismatch("theta0 must be a nonempty vector")
        if not np.all(np.isfinite(theta0)):
            raise InvalidScenario("theta0 must be finite")
        p = theta0.size
        C = np.asarray(self.moments.C, dtype=float)
        C_delta = np.asarray(self.moments.C_delta, dtype=float)
        if C.shape != (p, p) or C_delta.shape != (p, p):
            raise DimensionMismatch("moment matrices must be p x p")
        self.penalty.check_dim(p)
        cholesky(C)  # rejects indefinite or asymmetric curvature up front

    @property
    def p(self) -> int:
        return self.theta0.size

    @cached_property
    def dirpen(self) -> DirectionalPenalty:
        return directional(self.penalty, self.theta0)

    @cached_property
    def true_pattern(self) -> Pattern:
        return pattern(self.penalty, self.theta0)

    def with_scale(self, alpha: float) -> "LimitLaw":
        """Same law with the penalty scale replaced by ``alpha``."""
        return LimitLaw(self.theta0, self.moments, self.penalty.with_scale(alpha))


def sample_limit(
    law: LimitLaw, rng: RngStream, opts: SolveOptions | None = None
) -> np.ndarray:
    """One draw of the limiting error.

    Draws a fresh score W ~ N(0, C_delta) and minimizes the limit objective.
    Deterministic given the stream.  Raises NotConverged when the solver
    cannot certify stationarity.
    """
    opts = opts if opts is not None else SolveOptions()
    W = sample_gaussian(np.zeros(law.p), law.moments.C_delta, rng)
    report = minimize_limit(law.moments.C, W, law.dirpen, opts)
    if not report.converged:
        raise NotConverged(f"limit solve stopped at kkt={report.kkt:.3e}")
    return report.minimizer


@dataclass(frozen=True)
class PatternDistribution:
    """Empirical law of the limiting pattern.

    ``cells`` holds (pattern, count) pairs sorted by decreasing mass, ties
    broken by the encoded string; ``successes`` is the number of converged
    draws behind the counts and ``failures`` the draws that were discarded.
    Probabilities are counts over successes, so they sum to one up to
    division rounding.
    """

    cells: tuple[tuple[Pattern, int], ...]
    draws: int
    successes: int
    failures: int
    stream: RngStream

    def __post_init__(self) -> None:
        if self.successes <= 0:
            raise InvalidScenario("a pattern distribution needs at least one draw")
        if self.successes + self.failures != self.draws:
            raise InvalidScenario("draw bookkeeping is inconsistent")
        if sum(c for _, c in self.cells) != self.successes:
            raise InvalidScenario("cell counts do not add up to the draw count")
        total = sum(c / self.successes for _, c in self.cells)
        if abs(total - 1.0) > 1e-12:
            raise InvalidScenario("probabilities do not sum to one")

    @cached_property
    def _counts(self) -> dict[Pattern, int]:
        return dict(self.cells)

    def probability(self, pat: Pattern) -> float:
        return self._counts.get(pat, 0) / self.successes

    def se(self, pat: Pattern) -> float:
        """Binomial standard error of the estimated cell probability."""
        ph = self.probability(pat)
        return math.sqrt(ph * (1.0 - ph) / self.successes)

    @property
    def support(self) -> tuple[Pattern, ...]:
        return tuple(pat for pat, _ in self.cells)

    def rows(self) -> tuple[tuple[str, float, float, int], ...]:
        """(encoded pattern, probability, standard error, count) per cell."""
        return tuple(
            (pat.encode(), self.probability(pat), self.se(pat), count)
            for pat, count in self.cells
        )


def limit_pattern_distribution(
    law: LimitLaw,
    draws: int,
    rng: RngStream,
    opts: SolveOptions | None = None,
) -> PatternDistribution:
    """Empirical distribution of the limiting pattern over `draws` samples.

    Draw i uses child stream i.  Non-converged draws are counted and skipped;
    once they exceed 0.1% of the budget the whole run aborts, because a
    censored sample would bias every cell.
    """
    draws = int(draws)
    if draws < 1:
        raise InvalidScenario("draws must be >= 1")
    opts = opts if opts is not None else SolveOptions()
    counts: dict[Pattern, int] = {}
    failures = 0
    for i in range(draws):
        try:
            u = sample_limit(law, rng.child(i), opts)
        except NotConverged as exc:
            failures += 1
            if failures > _FAIL_FRACTION * draws:
                raise NotConverged(
                    f"{failures} of {i + 1} limit draws failed to converge"
                ) from exc
            continue
        pat = limit_pattern(law.penalty, law.theta0, u)
        counts[pat] = counts.get(pat, 0) + 1
    cells = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0].encode())))
    return PatternDistribution(cells, draws, draws - failures, failures, rng)


# -- probability of exact pattern recovery ------------------------------------


def recovery_gaussian(
    law: LimitLaw, *, basis: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the Gaussian whose mass on the subdifferential
    at theta0 equals the limiting probability of exact pattern recovery.

    Whiten by C^(1/2), project onto the whitened pattern space, map back:
    the mean keeps the projected component of a relative-interior subgradient,
    the covariance keeps only the orthogonal component of the score noise.
    The covariance is singular by construction whenever the pattern space is
    nontrivial, and the result does not depend on which basis spans the
    pattern space.  ``basis`` overrides the canonical pattern basis (same
    span, different vectors) — useful for checking exactly that invariance.
    """
    C = law.moments.C
    p = law.p
    if basis is None:
        basis = pattern_basis(law.penalty, law.true_pattern)
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2 or basis.shape[0] != p:
        raise DimensionMismatch("basis must be a p-row matrix")
    evals, vecs = np.linalg.eigh((C + C.T) / 2.0)
    if evals.size and evals[0] <= 0.0:
        raise NotPositiveDefinite("curvature must be positive definite")
    root = (vecs * np.sqrt(evals)) @ vecs.T
    root_inv = (vecs / np.sqrt(evals)) @ vecs.T
    P = projector(list((root @ basis).T), dim=p)
    v0 = subdiff_ri_point(law.penalty, law.theta0)
    mu = root @ (P @ (root_inv @ v0))
    residual_map = root @ ((np.eye(p) - P) @ root_inv)
    sigma = residual_map @ np.asarray(law.moments.C_delta, dtype=float) @ residual_map.T
    return mu, (sigma + sigma.T) / 2.0


@dataclass(frozen=True)
class RecoveryProbability:
    """Monte-Carlo estimate of the recovery probability with its own error."""

    probability: float
    se: float
    draws: int


def recovery_probability_formula(
    law: LimitLaw, draws: int, rng: RngStream, *, tol: float = 1e-9
) -> RecoveryProbability:
    """P[N(mu, Sigma) lies in the subdifferential at theta0], by Monte Carlo.

    The Gaussian comes from :func:`recovery_gaussian`; its covariance is
    singular, so draws always go through the eigendecomposition path of
    ``sample_gaussian``.  Draw i uses child stream i.
    """
    draws = int(draws)
    if draws < 1:
        raise InvalidScenario("draws must be >= 1")
    mu, sigma = recovery_gaussian(law)
    hits = 0
    for i in range(draws):
        z = sample_gaussian(mu, sigma, rng.child(i), method="eigh")
        if subdiff_contains(law.penalty, law.theta0, z, tol=tol):
            hits += 1
    phat = hits / draws
    se = math.sqrt(phat * (1.0 - phat) / draws)
    return RecoveryProbability(phat, se, draws)


# -- irrepresentability --------------------------------------------------------


@dataclass(frozen=True)
class IrrepResult:
    """Outcome of the irrepresentability check: verdict plus the margin."""

    holds: bool
    margin: float

    def __bool__(self) -> bool:
        return self.holds


def irrepresentability_check(law: LimitLaw) -> IrrepResult:
    """Does the curvature image of the pattern space meet the relative
    interior of the subdifferential at theta0 — and with how much room?

    One LP over pattern-basis coefficients c maximizes a margin delta such
    that C @ basis @ c stays inside the subdifferential even after any
    sup-norm perturbation of size delta within its affine hull (for the fused
    variant delta is the box margin of the free dual parameters instead).
    The condition holds when the best margin exceeds 1e-9; faces with no
    inequality directions (single points) degenerate to a plain linear
    feasibility problem and report an infinite margin.
    """
    pen = law.penalty
    theta0 = law.theta0
    p = law.p
    a = pen.scale
    if pen.variant == "none" or a == 0.0:
        # the subdifferential is {0} and c = 0 always reaches it
        return IrrepResult(True, math.inf)

    M = np.asarray(law.moments.C, dtype=float) @ pattern_basis(pen, law.true_pattern)
    m = M.shape[1]

    DELTA = -1  # sentinel column index, remapped after the count is known
    nv = m
    bounds: list[tuple[float | None, float | None]] = [(None, None)] * m
    eq_rows: list[dict[int, float]] = []
    eq_rhs: list[float] = []
    ub_rows: list[dict[int, float]] = []
    ub_rhs: list[float] = []

    def new_var(lo: float | None, hi: float | None) -> int:
        nonlocal nv
        bounds.append((lo, hi))
        nv += 1
        return nv - 1

    def vrow(i: int, sign: float = 1.0) -> dict[int, float]:
        # coefficients of sign * v_i = sign * (M c)_i over the c block
        return {j: sign * M[i, j] for j in range(m) if M[i, j] != 0.0}

    def sum_largest_rows(
        xrows: list[dict[int, float]], k: int, cap: float, margin_scale: float
    ) -> None:
        # epigraph of the sum of the k largest affine expressions in xrows:
        # k*t + sum_i max(0, x_i - t) <= cap - margin_scale * delta
        t = new_var(None, None)
        head: dict[int, float] = {t: float(k), DELTA: margin_scale}
        for xr in xrows:
            s_i = new_var(0.0, None)
            row = dict(xr)
            row[t] = row.get(t, 0.0) - 1.0
            row[s_i] = -1.0
            ub_rows.append(row)
            ub_rhs.append(0.0)
            head[s_i] = 1.0
        ub_rows.append(head)
        ub_rhs.append(cap)

    if pen.variant in ("lasso", "weighted_lasso", "elastic_net"):
        if pen.variant == "lasso":
            bound = np.full(p, a * pen.lam)
        elif pen.variant == "weighted_lasso":
            bound = a * np.asarray(pen.weights, dtype=float)
        else:
            bound = np.full(p, a * pen.lam1)
        shift = 2.0 * a * pen.lam2 * theta0 if pen.variant == "elastic_net" else np.zeros(p)
        for i in range(p):
            if theta0[i] != 0.0:
                eq_rows.append(vrow(i))
                eq_rhs.append(bound[i] * float(np.sign(theta0[i])) + shift[i])
            elif bound[i] <= 0.0:
                eq_rows.append(vrow(i))
                eq_rhs.append(0.0)
            else:
                up = vrow(i)
                up[DELTA] = up.get(DELTA, 0.0) + 1.0
                ub_rows.append(up)
                ub_rhs.append(float(bound[i]))
                dn = vrow(i, -1.0)
                dn[DELTA] = dn.get(DELTA, 0.0) + 1.0
                ub_rows.append(dn)
                ub_rhs.append(float(bound[i]))
    elif pen.variant == "slope":
        pat, groups = _slope_groups(pen, theta0)
        signs = np.asarray(pat.signs, dtype=float)
        for idx, mu_raw, signed in groups:
            if idx.size == 0:
                continue
            mu = a * np.asarray(mu_raw, dtype=float)
            size = idx.size
            caps = np.cumsum(mu)
            if signed:
                if mu.max() - mu.min() <= 1e-12 * max(1.0, mu.max()):
                    # constant weights pin the whole face to a single point
                    level = float(mu.mean())
                    for i in idx:
                        eq_rows.append(vrow(i))
                        eq_rhs.append(signs[i] * level)
                    continue
                total: dict[int, float] = {}
                for i in idx:
                    for jj, coef in vrow(i, signs[i]).items():
                        total[jj] = total.get(jj, 0.0) + coef
                eq_rows.append(total)
                eq_rhs.append(float(mu.sum()))
                xrows = [vrow(i, signs[i]) for i in idx]
                for k in range(1, size):
                    # inside the sum-zero affine hull an inf-ball of radius
                    # delta moves a k-subset sum by min(k, size-k) * delta
                    sum_largest_rows(xrows, k, float(caps[k - 1]), float(min(k, size - k)))
            else:
                if mu.size == 0 or mu[0] <= 0.0:
                    for i in idx:
                        eq_rows.append(vrow(i))
                        eq_rhs.append(0.0)
                    continue
                xrows = []
                for i in idx:
                    w = new_var(0.0, None)  # w_i >= |v_i| via the next two rows
                    up = vrow(i)
                    up[w] = -1.0
                    ub_rows.append(up)
                    ub_rhs.append(0.0)
                    dn = vrow(i, -1.0)
                    dn[w] = -1.0
                    ub_rows.append(dn)
                    ub_rhs.append(0.0)
                    xrows.append({w: 1.0})
                for k in range(1, size + 1):
                    sum_largest_rows(xrows, k, float(caps[k - 1]), float(k))
    elif pen.variant == "fused_lasso":
        l1, tv = a * pen.lam1, a * pen.lam2
        s = np.sign(theta0)
        d = np.sign(np.diff(theta0)) if p > 1 else np.zeros(0)
        base = l1 * s
        if p > 1:
            base[:-1] -= tv * d
            base[1:] += tv * d
        cols: list[np.ndarray] = []
        if l1 > 0.0:
            for i in np.flatnonzero(s == 0.0):
                e = np.zeros(p)
                e[i] = l1
                cols.append(e)
        if tv > 0.0:
            for j in np.flatnonzero(d == 0.0):
                e = np.zeros(p)
                e[j] = -tv
                e[j + 1] = tv
                cols.append(e)
        qvars = [new_var(None, None) for _ in cols]
        for i in range(p):
            row = vrow(i)
            for q, col in zip(qvars, cols):
                if col[i] != 0.0:
                    row[q] = -float(col[i])
            eq_rows.append(row)
            eq_rhs.append(float(base[i]))
        for q in qvars:
            ub_rows.append({q: 1.0, DELTA: 1.0})
            ub_rhs.append(1.0)
            ub_rows.append({q: -1.0, DELTA: 1.0})
            ub_rhs.append(1.0)
    else:  # pragma: no cover - PenaltySpec validation rules this out
        raise InvalidScenario(f"unknown penalty variant {pen.variant!r}")

    if not ub_rows:
        # pure-equality face: plain linear feasibility, no margin to speak of
        if not eq_rows:
            return IrrepResult(True, math.inf)
        A = np.zeros((len(eq_rows), nv))
        for r, entries in enumerate(eq_rows):
            for jj, coef in entries.items():
                A[r, jj] = coef
        b = np.asarray(eq_rhs, dtype=float)
        sol, *_ = np.linalg.lstsq(A, b, rcond=None)
        gap = np.max(np.abs(A @ sol - b), initial=0.0)
        ok = gap <= 1e-8 * max(1.0, np.max(np.abs(b), initial=0.0))
        return IrrepResult(bool(ok), math.inf if ok else 0.0)

    delta = new_var(0.0, None)

    def densify(rows: list[dict[int, float]]) -> np.ndarray:
        A = np.zeros((len(rows), nv))
        for r, entries in enumerate(rows):
            for jj, coef in entries.items():
                A[r, delta if jj == DELTA else jj] = coef
        return A

    cobj = np.zeros(nv)
    cobj[delta] = -1.0
    res = linprog(
        cobj,
        A_ub=densify(ub_rows),
        b_ub=np.asarray(ub_rhs, dtype=float),
        A_eq=densify(eq_rows) if eq_rows else None,
        b_eq=np.asarray(eq_rhs, dtype=float) if eq_rows else None,
        bounds=bounds,
        method="highs",
    )
    if not res.success:
        return IrrepResult(False, 0.0)
    margin = float(res.x[delta])
    return IrrepResult(margin > 1e-9, margin)


# -- penalty-scale sweeps --------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    """Recovery probability of the true pattern at one penalty scale."""

    alpha: float
    probability: float
    se: float
    failures: int


def alpha_sweep_recovery(
    law: LimitLaw,
    alphas: Sequence[float] | Iterable[float],
    draws: int,
    rng: RngStream,
    opts: SolveOptions | None = None,
) -> tuple[SweepPoint, ...]:
    """Mass the limiting pattern law puts on pattern(theta0), per scale.

    Grid point j replaces the penalty scale of the template law by alphas[j]
    and is driven by child stream j, so extending the grid never perturbs
    earlier points.
    """
    target = law.true_pattern
    out = []
    for j, alpha in enumerate(alphas):
        alpha = float(alpha)
        if alpha < 0.0:
            raise InvalidScenario("penalty scales must be nonnegative")
        dist = limit_pattern_distribution(law.with_scale(alpha), draws, rng.child(j), opts)
        out.append(SweepPoint(alpha, dist.probability(target), dist.se(target), dist.failures))
    return tuple(out)
