"""Discrete pattern encodings and the subspaces they span.

Each penalty variant induces an equivalence on parameter vectors: two points
are equivalent when the polyhedral part of the penalty subdifferential is the
same set at both.  The encodings here are canonical labels for those classes:

- none            -> the single trivial class
- lasso family    -> sign vector in {-1, 0, +1}^p
- slope           -> signs plus cluster ranks; rank 0 is the zero cluster and
                     ranks increase with magnitude (the largest cluster gets
                     the highest rank)
- fused lasso     -> sign vector plus the sign vector of first differences

`limit_pattern` evaluates the encoding an infinitesimal step away from a base
point, which is the object pattern-recovery probabilities are about.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, InvalidPattern, InvalidPenalty
from .spec import PenaltySpec

__all__ = ["Pattern", "pattern", "limit_pattern", "pattern_basis"]

_SIGN_CHARS = {-1: "-", 0: "0", 1: "+"}


@dataclass(frozen=True)
class Pattern:
    """Hashable pattern label; `ranks`/`diff_signs` only for slope/fused."""

    variant: str
    signs: tuple[int, ...] = ()
    ranks: tuple[int, ...] = ()
    diff_signs: tuple[int, ...] = ()
    dim: int = 0

    def __post_init__(self) -> None:
        if self.variant == "none":
            if self.dim <= 0:
                raise InvalidPattern("trivial pattern needs an explicit dimension")
            return
        if self.dim == 0:
            object.__setattr__(self, "dim", len(self.signs))
        if self.dim != len(self.signs):
            raise InvalidPattern("dim does not match sign vector length")
        if any(s not in (-1, 0, 1) for s in self.signs):
            raise InvalidPattern("signs must lie in {-1, 0, +1}")
        if self.variant == "slope":
            self._check_slope()
        elif self.variant == "fused_lasso":
            self._check_fused()
        elif self.ranks or self.diff_signs:
            raise InvalidPattern(f"{self.variant} patterns carry signs only")

    def _check_slope(self) -> None:
        if len(self.ranks) != len(self.signs):
            raise InvalidPattern("ranks length must match signs length")
        m = max(self.ranks, default=0)
        seen = set()
        for s, r in zip(self.signs, self.ranks):
            if (r == 0) != (s == 0):
                raise InvalidPattern("rank 0 exactly on zero coordinates")
            if r < 0 or r > m:
                raise InvalidPattern("ranks must lie in 0..m")
            seen.add(r)
        if m > 0 and seen.difference({0}) != set(range(1, m + 1)):
            raise InvalidPattern("nonzero ranks must cover 1..m")

    def _check_fused(self) -> None:
        if len(self.diff_signs) != max(len(self.signs) - 1, 0):
            raise InvalidPattern("diff_signs must have length p-1")
        for j, d in enumerate(self.diff_signs):
            if d not in (-1, 0, 1):
                raise InvalidPattern("diff signs must lie in {-1, 0, +1}")
            lo, hi = self.signs[j], self.signs[j + 1]
            if d == 0 and lo != hi:
                raise InvalidPattern("a zero difference forces equal signs")
            if lo == hi == 0 and d != 0:
                raise InvalidPattern("two exact zeros cannot differ")
            if lo != hi and d != int(np.sign(hi - lo)):
                raise InvalidPattern("difference sign contradicts coordinate signs")

    def encode(self) -> str:
        """Compact string form used in CSV output."""
        if self.variant == "none":
            return "*"
        if self.variant == "slope":
            return ",".join(
                "0" if r == 0 else f"{_SIGN_CHARS[s]}{r}"
                for s, r in zip(self.signs, self.ranks)
            )
        base = "".join(_SIGN_CHARS[s] for s in self.signs)
        if self.variant == "fused_lasso":
            return base + "|" + "".join(_SIGN_CHARS[d] for d in self.diff_signs)
        return base

    def __str__(self) -> str:  # noqa: D105
        return self.encode()


def _signs_with_tol(x: np.ndarray, tol: float) -> np.ndarray:
    s = np.sign(x).astype(int)
    s[np.abs(x) <= tol] = 0
    return s


def _slope_clusters(mags: np.ndarray, tol: float) -> np.ndarray:
    """Rank vector for magnitudes: 0 for (near-)zeros, then 1..m ascending."""
    p = mags.shape[0]
    ranks = np.zeros(p, dtype=int)
    nz = np.flatnonzero(mags > tol)
    if nz.size == 0:
        return ranks
    order = nz[np.argsort(-mags[nz], kind="stable")]
    # walk downward; a gap larger than tol starts a new cluster
    labels = np.empty(order.size, dtype=int)
    labels[0] = 0
    clusters = 1
    for t in range(1, order.size):
        if mags[order[t - 1]] - mags[order[t]] > tol:
            clusters += 1
        labels[t] = clusters - 1
    ranks[order] = clusters - labels  # descending label -> ascending rank
    return ranks


def pattern(pen: PenaltySpec, theta: np.ndarray, tol: float = 0.0) -> Pattern:
    """Pattern of theta; `tol` is the absolute magnitude below which entries tie."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise DimensionMismatch("theta must be a vector")
    p = theta.shape[0]
    pen.check_dim(p)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if pen.variant == "none":
        return Pattern("none", dim=p)
    signs = _signs_with_tol(theta, tol)
    if pen.variant in ("lasso", "weighted_lasso", "elastic_net"):
        return Pattern(pen.variant, tuple(int(x) for x in signs))
    if pen.variant == "slope":
        ranks = _slope_clusters(np.abs(theta), tol)
        ranks[signs == 0] = 0
        # re-pack in case thresholding emptied a cluster
        kept = sorted(set(ranks[ranks > 0]))
        remap = {r: i + 1 for i, r in enumerate(kept)}
        ranks = np.array([remap.get(r, 0) for r in ranks], dtype=int)
        return Pattern("slope", tuple(int(x) for x in signs), ranks=tuple(int(r) for r in ranks))
    if pen.variant == "fused_lasso":
        diffs = np.diff(theta)
        d = _signs_with_tol(diffs, tol)
        for j in range(p - 1):
            lo, hi = signs[j], signs[j + 1]
            if lo == hi == 0:
                d[j] = 0
            elif lo != hi:
                d[j] = int(np.sign(hi - lo))
        return Pattern("fused_lasso", tuple(int(x) for x in signs), diff_signs=tuple(int(x) for x in d))
    raise InvalidPenalty(pen.variant)


def limit_pattern(pen: PenaltySpec, theta0: np.ndarray, u: np.ndarray) -> Pattern:
    """Pattern of theta0 + eps*u for infinitesimal eps > 0, evaluated symbolically."""
    theta0 = np.asarray(theta0, dtype=float)
    u = np.asarray(u, dtype=float)
    if theta0.shape != u.shape or theta0.ndim != 1:
        raise DimensionMismatch("theta0 and u must be vectors of equal length")
    p = theta0.shape[0]
    pen.check_dim(p)
    if pen.variant == "none":
        return Pattern("none", dim=p)

    s0 = np.sign(theta0).astype(int)
    su = np.sign(u).astype(int)
    signs = np.where(s0 != 0, s0, su)

    if pen.variant in ("lasso", "weighted_lasso", "elastic_net"):
        return Pattern(pen.variant, tuple(int(x) for x in signs))

    if pen.variant == "fused_lasso":
        d0 = np.sign(np.diff(theta0)).astype(int)
        du = np.sign(np.diff(u)).astype(int)
        d = np.where(d0 != 0, d0, du)
        return Pattern("fused_lasso", tuple(int(x) for x in signs), diff_signs=tuple(int(x) for x in d))

    if pen.variant == "slope":
        base = pattern(pen, theta0, tol=0.0)
        max_rank = max(base.ranks, default=0)
        # sub-levels in decreasing perturbed magnitude: clusters of theta0 from
        # the top, each split by s*u decreasing; the zero cluster last, split
        # by |u| decreasing with exact zeros staying at rank 0
        levels: list[list[int]] = []
        for r in range(max_rank, 0, -1):
            idx = [i for i in range(p) if base.ranks[i] == r]
            keys = sorted({signs[i] * u[i] for i in idx}, reverse=True)
            for k in keys:
                levels.append([i for i in idx if signs[i] * u[i] == k])
        zero_idx = [i for i in range(p) if base.ranks[i] == 0 and u[i] != 0.0]
        zkeys = sorted({abs(u[i]) for i in zero_idx}, reverse=True)
        for k in zkeys:
            levels.append([i for i in zero_idx if abs(u[i]) == k])
        ranks = np.zeros(p, dtype=int)
        m = len(levels)
        for t, grp in enumerate(levels):
            for i in grp:
                ranks[i] = m - t
        return Pattern("slope", tuple(int(x) for x in signs), ranks=tuple(int(r) for r in ranks))

    raise InvalidPenalty(pen.variant)


def fused_blocks(pat: Pattern) -> list[tuple[int, int, int]]:
    """Maximal constant runs of a fused pattern as (start, stop, sign) triples."""
    if pat.variant != "fused_lasso":
        raise InvalidPattern("not a fused-lasso pattern")
    out = []
    start = 0
    for j in range(pat.dim - 1):
        if pat.diff_signs[j] != 0:
            out.append((start, j + 1, pat.signs[start]))
            start = j + 1
    out.append((start, pat.dim, pat.signs[start]))
    return out


def pattern_basis(pen: PenaltySpec, pat: Pattern) -> np.ndarray:
    """Columns spanning the model subspace of a pattern.

    lasso family: one unsigned indicator per support coordinate; slope: one
    signed indicator per nonzero cluster (largest cluster first); fused: one
    signed indicator per nonzero block (left to right); none: the full space.
    """
    if pat.variant != pen.variant:
        raise InvalidPattern(f"pattern is {pat.variant!r}, penalty is {pen.variant!r}")
    p = pat.dim
    pen.check_dim(p)
    if pen.variant == "none":
        return np.eye(p)
    if pen.variant in ("lasso", "weighted_lasso", "elastic_net"):
        cols = [np.eye(p)[:, i] for i in range(p) if pat.signs[i] != 0]
    elif pen.variant == "slope":
        m = max(pat.ranks, default=0)
        cols = []
        for r in range(m, 0, -1):
            vec = np.zeros(p)
            for i in range(p):
                if pat.ranks[i] == r:
                    vec[i] = float(pat.signs[i])
            cols.append(vec)
    elif pen.variant == "fused_lasso":
        cols = []
        for start, stop, sign in fused_blocks(pat):
            if sign != 0:
                vec = np.zeros(p)
                vec[start:stop] = float(sign)
                cols.append(vec)
    else:
        raise InvalidPenalty(pen.variant)
    if not cols:
        return np.zeros((p, 0))
    return np.column_stack(cols)
