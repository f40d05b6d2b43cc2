"""Directional derivative u -> f'(theta0; u) of a penalty at a base point.

For every variant this is again a convex, positively homogeneous function of
u built from four primitives on disjoint index blocks plus one linear
offset:

- the offset collects all linear contributions (active signs, boundary
  differences, the gradient of any differentiable part);
- AbsBlock        weighted ℓ1 over coordinates at zero;
- SortedL1Block   sorted-ℓ1 over the slope zero cluster;
- OrderedBlock    signed order-statistic sum over one tied slope cluster;
- FusedBlock      ℓ1 + total variation inside one fused segment.

The blocks never share coordinates, so values, proxes, and subdifferential
checks all decompose exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, InvalidPenalty
from .pattern import fused_blocks, pattern
from .prox import ordered_weight_prox, soft_threshold, sorted_l1_prox, tv1d_prox
from .spec import PenaltySpec
from .subdiff import (
    _fused_contains,
    _fused_distance,
    _majorized,
    _perm_face_distance,
    _slope_groups,
    _wl1_contains,
    _wl1_distance,
    subdiff_contains as _pen_contains,
    subdiff_distance as _pen_distance,
)

__all__ = [
    "AbsBlock",
    "SortedL1Block",
    "OrderedBlock",
    "FusedBlock",
    "DirectionalPenalty",
    "directional",
]


@dataclass(frozen=True)
class AbsBlock:
    idx: tuple[int, ...]
    weights: tuple[float, ...]


@dataclass(frozen=True)
class SortedL1Block:
    idx: tuple[int, ...]
    mu: tuple[float, ...]


@dataclass(frozen=True)
class OrderedBlock:
    idx: tuple[int, ...]
    signs: tuple[int, ...]
    mu: tuple[float, ...]


@dataclass(frozen=True)
class FusedBlock:
    idx: tuple[int, ...]  # contiguous run
    l1: float
    tv: float


Block = AbsBlock | SortedL1Block | OrderedBlock | FusedBlock


def _ordered_groups(w: np.ndarray, mu: np.ndarray):
    """Split exact ties of w (descending) against consecutive slices of mu."""
    order = np.argsort(-w, kind="stable")
    groups = []
    pos = 0
    while pos < order.size:
        stop = pos
        while stop + 1 < order.size and w[order[stop + 1]] == w[order[pos]]:
            stop += 1
        groups.append((order[pos : stop + 1], mu[pos : stop + 1]))
        pos = stop + 1
    return groups


@dataclass(frozen=True)
class DirectionalPenalty:
    """f'(theta0; .) in offset-plus-blocks form; positively homogeneous."""

    dim: int
    offset: np.ndarray
    blocks: tuple[Block, ...] = ()

    def _check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise DimensionMismatch(f"expected dimension {self.dim}")
        return u

    def value(self, u) -> float:
        u = self._check(u)
        out = float(self.offset @ u)
        for blk in self.blocks:
            sub = u[list(blk.idx)]
            if isinstance(blk, AbsBlock):
                out += float(np.abs(sub) @ np.asarray(blk.weights))
            elif isinstance(blk, SortedL1Block):
                out += float(np.sort(np.abs(sub))[::-1] @ np.asarray(blk.mu))
            elif isinstance(blk, OrderedBlock):
                w = np.asarray(blk.signs) * sub
                out += float(np.sort(w)[::-1] @ np.asarray(blk.mu))
            else:
                out += blk.l1 * float(np.abs(sub).sum())
                if sub.size > 1:
                    out += blk.tv * float(np.abs(np.diff(sub)).sum())
        return out

    def prox(self, v, t: float) -> np.ndarray:
        v = self._check(v)
        if t < 0:
            raise ValueError("step t must be nonnegative")
        out = v - t * self.offset
        for blk in self.blocks:
            idx = list(blk.idx)
            sub = out[idx]
            if isinstance(blk, AbsBlock):
                out[idx] = soft_threshold(sub, t * np.asarray(blk.weights))
            elif isinstance(blk, SortedL1Block):
                out[idx] = sorted_l1_prox(sub, t * np.asarray(blk.mu))
            elif isinstance(blk, OrderedBlock):
                s = np.asarray(blk.signs, dtype=float)
                out[idx] = s * ordered_weight_prox(s * sub, t * np.asarray(blk.mu))
            else:
                out[idx] = soft_threshold(tv1d_prox(sub, t * blk.tv), t * blk.l1)
        return out

    def subdiff_contains(self, u, v, tol: float = 1e-9) -> bool:
        u = self._check(u)
        v = self._check(v)
        r = v - self.offset
        covered = np.zeros(self.dim, dtype=bool)
        for blk in self.blocks:
            idx = list(blk.idx)
            covered[idx] = True
            ru, su = r[idx], u[idx]
            if isinstance(blk, AbsBlock):
                if not _wl1_contains(ru, np.sign(su), np.asarray(blk.weights), tol):
                    return False
            elif isinstance(blk, SortedL1Block):
                if max(blk.mu) > 0:
                    if not _pen_contains(PenaltySpec.slope(blk.mu), su, ru, tol):
                        return False
                elif np.max(np.abs(ru), initial=0.0) > tol:
                    return False
            elif isinstance(blk, OrderedBlock):
                s = np.asarray(blk.signs, dtype=float)
                w, rs = s * su, s * ru
                for g, mu_g in _ordered_groups(w, np.asarray(blk.mu)):
                    vals = np.sort(rs[g])[::-1]
                    if not _majorized(vals, mu_g, tol, tie_total=True):
                        return False
            else:
                if not _fused_contains(ru, su, blk.l1, blk.tv, tol):
                    return False
        return not np.any(np.abs(r[~covered]) > tol)

    def subdiff_distance(self, u, v) -> float:
        u = self._check(u)
        v = self._check(v)
        r = v - self.offset
        covered = np.zeros(self.dim, dtype=bool)
        d2 = 0.0
        for blk in self.blocks:
            idx = list(blk.idx)
            covered[idx] = True
            ru, su = r[idx], u[idx]
            if isinstance(blk, AbsBlock):
                d2 += _wl1_distance(ru, np.sign(su), np.asarray(blk.weights)) ** 2
            elif isinstance(blk, SortedL1Block):
                if max(blk.mu) > 0:
                    d2 += _pen_distance(PenaltySpec.slope(blk.mu), su, ru) ** 2
                else:
                    d2 += float(ru @ ru)
            elif isinstance(blk, OrderedBlock):
                s = np.asarray(blk.signs, dtype=float)
                w, rs = s * su, s * ru
                for g, mu_g in _ordered_groups(w, np.asarray(blk.mu)):
                    d2 += _perm_face_distance(rs[g], mu_g) ** 2
            else:
                d2 += _fused_distance(ru, su, blk.l1, blk.tv) ** 2
        d2 += float(r[~covered] @ r[~covered])
        return float(np.sqrt(d2))


def directional(pen: PenaltySpec, theta0) -> DirectionalPenalty:
    """Build f'(theta0; .) for the scaled penalty."""
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.ndim != 1:
        raise DimensionMismatch("theta0 must be a vector")
    p = theta0.shape[0]
    pen.check_dim(p)
    a = pen.scale
    offset = np.zeros(p)
    blocks: list[Block] = []
    if pen.variant == "none" or a == 0.0:
        return DirectionalPenalty(p, offset)
    s = np.sign(theta0)
    zero = tuple(int(i) for i in np.flatnonzero(s == 0))

    if pen.variant in ("lasso", "weighted_lasso", "elastic_net"):
        if pen.variant == "weighted_lasso":
            w = a * np.asarray(pen.weights)
        else:
            lam1 = pen.lam if pen.variant == "lasso" else pen.lam1
            w = np.full(p, a * lam1)
        offset = w * s
        if pen.variant == "elastic_net":
            offset = offset + 2.0 * a * pen.lam2 * theta0
        keep = tuple(i for i in zero if w[i] > 0)
        if keep:
            blocks.append(AbsBlock(keep, tuple(float(w[i]) for i in keep)))
        return DirectionalPenalty(p, offset, tuple(blocks))

    if pen.variant == "slope":
        _, groups = _slope_groups(pen, theta0)
        for idx, lam_blk, signed in groups:
            if idx.size == 0:
                continue
            mu = a * lam_blk
            if signed:
                if idx.size == 1 or float(mu.max() - mu.min()) == 0.0:
                    # a constant weight block acts linearly on the cluster
                    offset[idx] += s[idx] * float(np.mean(mu))
                else:
                    blocks.append(
                        OrderedBlock(
                            tuple(int(i) for i in idx),
                            tuple(int(s[i]) for i in idx),
                            tuple(float(m) for m in mu),
                        )
                    )
            elif mu.size and mu[0] > 0.0:
                blocks.append(
                    SortedL1Block(tuple(int(i) for i in idx), tuple(float(m) for m in mu))
                )
        return DirectionalPenalty(p, offset, tuple(blocks))

    if pen.variant == "fused_lasso":
        pat = pattern(pen, theta0, tol=0.0)
        offset = a * pen.lam1 * s
        d = np.sign(np.diff(theta0)) if p > 1 else np.zeros(0)
        if p > 1:
            offset[:-1] -= a * pen.lam2 * d
            offset[1:] += a * pen.lam2 * d
        for start, stop, sign in fused_blocks(pat):
            run = tuple(range(start, stop))
            l1 = a * pen.lam1 if sign == 0 else 0.0
            tv = a * pen.lam2 if stop - start > 1 else 0.0
            if l1 > 0.0 or tv > 0.0:
                blocks.append(FusedBlock(run, l1, tv))
        return DirectionalPenalty(p, offset, tuple(blocks))

    raise InvalidPenalty(pen.variant)
