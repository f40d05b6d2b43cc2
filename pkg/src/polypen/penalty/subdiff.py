"""Subdifferential geometry for the penalty variants.

At any point the polyhedral part of the subdifferential factorizes over the
pattern structure: boxes/intervals for separable ℓ1-type penalties, a product
of permutation polytopes and a sorted-ℓ1 dual ball for slope, and an affine
image of boxes for the fused lasso.  Membership checks use the factorized
description directly; Euclidean distances use Moreau decompositions (slope)
or a small box-constrained least squares (fused).
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog, lsq_linear

from ..errors import DimensionMismatch, InvalidPenalty
from .pattern import fused_blocks, pattern
from .prox import ordered_weight_prox, sorted_l1_prox
from .spec import PenaltySpec

__all__ = [
    "subdiff_contains",
    "subdiff_distance",
    "subdiff_ri_point",
    "subdiff_parallel_basis",
]


# -- slope building blocks ---------------------------------------------------


def _slope_groups(pen: PenaltySpec, theta: np.ndarray):
    """(indices, lam block, signed) groups: nonzero clusters from the largest
    down, each paired with its consecutive slice of the lambda sequence, then
    the zero set with the tail slice."""
    pat = pattern(pen, theta, tol=0.0)
    lam = np.asarray(pen.lam_seq, dtype=float)
    m = max(pat.ranks, default=0)
    groups = []
    pos = 0
    for r in range(m, 0, -1):
        idx = np.flatnonzero(np.asarray(pat.ranks) == r)
        groups.append((idx, lam[pos : pos + idx.size], True))
        pos += idx.size
    zero = np.flatnonzero(np.asarray(pat.ranks) == 0)
    groups.append((zero, lam[pos:], False))
    return pat, groups


def _majorized(w_desc: np.ndarray, caps: np.ndarray, tol: float, *, tie_total: bool) -> bool:
    """Partial-sum dominance of sorted values by caps, optionally with an
    equality constraint on the grand total."""
    cw = np.cumsum(w_desc)
    cc = np.cumsum(caps)
    upto = cw.size if not tie_total else cw.size - 1
    if np.any(cw[:upto] > cc[:upto] + tol):
        return False
    if tie_total and abs(cw[-1] - cc[-1]) > tol:
        return False
    return True


def _perm_face_distance(v: np.ndarray, mu: np.ndarray) -> float:
    """Distance from v to the convex hull of permutations of mu (nonincreasing)."""
    return float(np.linalg.norm(ordered_weight_prox(v, mu)))


# -- fused building blocks ----------------------------------------------------


def _fused_free_matrix(theta: np.ndarray, l1: float, tv: float):
    """Fixed offset plus the matrix of free box directions for the fused
    subdifferential l1*a + tv*D^T b at theta."""
    p = theta.shape[0]
    s = np.sign(theta)
    d = np.sign(np.diff(theta)) if p > 1 else np.zeros(0)
    base = l1 * s
    if p > 1:
        base[:-1] -= tv * d
        base[1:] += tv * d
    cols = []
    for i in np.flatnonzero(s == 0):
        e = np.zeros(p)
        e[i] = l1
        cols.append(e)
    for j in np.flatnonzero(d == 0):
        e = np.zeros(p)
        e[j] = -tv
        e[j + 1] = tv
        cols.append(e)
    mat = np.column_stack(cols) if cols else np.zeros((p, 0))
    return base, mat


def _fused_distance(v: np.ndarray, theta: np.ndarray, l1: float, tv: float) -> float:
    base, mat = _fused_free_matrix(theta, l1, tv)
    r = v - base
    if mat.shape[1] == 0:
        return float(np.linalg.norm(r))
    res = lsq_linear(mat, r, bounds=(-1.0, 1.0), method="bvls", tol=1e-14)
    return float(np.linalg.norm(mat @ res.x - r))


def _fused_contains(v: np.ndarray, theta: np.ndarray, l1: float, tv: float, tol: float) -> bool:
    base, mat = _fused_free_matrix(theta, l1, tv)
    r = v - base
    k = mat.shape[1]
    if k == 0:
        return bool(np.max(np.abs(r), initial=0.0) <= tol)
    # minimize the sup-norm slack t over the free box variables
    p = r.shape[0]
    a_ub = np.block([[mat, -np.ones((p, 1))], [-mat, -np.ones((p, 1))]])
    b_ub = np.concatenate([r, -r])
    c = np.zeros(k + 1)
    c[-1] = 1.0
    bounds = [(-1.0, 1.0)] * k + [(0.0, None)]
    sol = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not sol.success:
        return False
    return bool(sol.fun <= tol)


# -- weighted ℓ1 building blocks ----------------------------------------------


def _wl1_contains(v: np.ndarray, s: np.ndarray, w: np.ndarray, tol: float) -> bool:
    on = s != 0
    if np.any(np.abs(v[on] - w[on] * s[on]) > tol):
        return False
    return not np.any(np.abs(v[~on]) > w[~on] + tol)


def _wl1_distance(v: np.ndarray, s: np.ndarray, w: np.ndarray) -> float:
    on = s != 0
    d2 = float(np.sum((v[on] - w[on] * s[on]) ** 2))
    d2 += float(np.sum(np.maximum(np.abs(v[~on]) - w[~on], 0.0) ** 2))
    return float(np.sqrt(d2))


def _check_pair(pen: PenaltySpec, theta, v):
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(v, dtype=float)
    if theta.shape != v.shape or theta.ndim != 1:
        raise DimensionMismatch("theta and v must be vectors of equal length")
    pen.check_dim(theta.shape[0])
    return theta, v


# -- public api ---------------------------------------------------------------


def subdiff_contains(pen: PenaltySpec, theta, v, tol: float = 1e-9) -> bool:
    """True iff v lies in the penalty subdifferential at theta, within tol.

    The pattern of theta is read off in exact arithmetic, so feed points
    whose ties are exact (prox outputs are; arbitrary float vectors are not).
    """
    theta, v = _check_pair(pen, theta, v)
    a = pen.scale
    if pen.variant == "none" or a == 0.0:
        return bool(np.max(np.abs(v), initial=0.0) <= tol)
    if pen.variant == "lasso":
        w = np.full(theta.shape, a * pen.lam)
        return _wl1_contains(v, np.sign(theta), w, tol)
    if pen.variant == "weighted_lasso":
        return _wl1_contains(v, np.sign(theta), a * np.asarray(pen.weights), tol)
    if pen.variant == "elastic_net":
        w = np.full(theta.shape, a * pen.lam1)
        return _wl1_contains(v - 2.0 * a * pen.lam2 * theta, np.sign(theta), w, tol)
    if pen.variant == "slope":
        _, groups = _slope_groups(pen, theta)
        for idx, lam_blk, signed in groups:
            if idx.size == 0:
                continue
            if signed:
                w = np.sort(np.sign(theta[idx]) * v[idx])[::-1]
                if not _majorized(w, a * lam_blk, tol, tie_total=True):
                    return False
            else:
                w = np.sort(np.abs(v[idx]))[::-1]
                if not _majorized(w, a * lam_blk, tol, tie_total=False):
                    return False
        return True
    if pen.variant == "fused_lasso":
        return _fused_contains(v, theta, a * pen.lam1, a * pen.lam2, tol)
    raise InvalidPenalty(pen.variant)


def subdiff_distance(pen: PenaltySpec, theta, v) -> float:
    """Euclidean distance from v to the penalty subdifferential at theta."""
    theta, v = _check_pair(pen, theta, v)
    a = pen.scale
    if pen.variant == "none" or a == 0.0:
        return float(np.linalg.norm(v))
    if pen.variant == "lasso":
        w = np.full(theta.shape, a * pen.lam)
        return _wl1_distance(v, np.sign(theta), w)
    if pen.variant == "weighted_lasso":
        return _wl1_distance(v, np.sign(theta), a * np.asarray(pen.weights))
    if pen.variant == "elastic_net":
        w = np.full(theta.shape, a * pen.lam1)
        return _wl1_distance(v - 2.0 * a * pen.lam2 * theta, np.sign(theta), w)
    if pen.variant == "slope":
        _, groups = _slope_groups(pen, theta)
        d2 = 0.0
        for idx, lam_blk, signed in groups:
            if idx.size == 0:
                continue
            if signed:
                d2 += _perm_face_distance(np.sign(theta[idx]) * v[idx], a * lam_blk) ** 2
            else:
                d2 += float(np.linalg.norm(sorted_l1_prox(v[idx], a * lam_blk)) ** 2)
        return float(np.sqrt(d2))
    if pen.variant == "fused_lasso":
        return _fused_distance(v, theta, a * pen.lam1, a * pen.lam2)
    raise InvalidPenalty(pen.variant)


def subdiff_ri_point(pen: PenaltySpec, theta) -> np.ndarray:
    """A point in the relative interior of the subdifferential at theta."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise DimensionMismatch("theta must be a vector")
    p = theta.shape[0]
    pen.check_dim(p)
    a = pen.scale
    out = np.zeros(p)
    if pen.variant == "none" or a == 0.0:
        return out
    s = np.sign(theta)
    if pen.variant == "lasso":
        return a * pen.lam * s
    if pen.variant == "weighted_lasso":
        return a * np.asarray(pen.weights) * s
    if pen.variant == "elastic_net":
        return a * pen.lam1 * s + 2.0 * a * pen.lam2 * theta
    if pen.variant == "slope":
        _, groups = _slope_groups(pen, theta)
        for idx, lam_blk, signed in groups:
            if idx.size and signed:
                out[idx] = s[idx] * a * float(np.mean(lam_blk))
        return out
    if pen.variant == "fused_lasso":
        d = np.sign(np.diff(theta)) if p > 1 else np.zeros(0)
        out = a * pen.lam1 * s
        if p > 1:
            out[:-1] -= a * pen.lam2 * d
            out[1:] += a * pen.lam2 * d
        return out
    raise InvalidPenalty(pen.variant)


def subdiff_parallel_basis(pen: PenaltySpec, theta) -> list[np.ndarray]:
    """Directions spanning the affine hull of the subdifferential at theta.

    Returned as a (possibly redundant) spanning list of vectors; empty when
    the subdifferential is a single point.
    """
    theta = np.asarray(theta, dtype=float)
    p = theta.shape[0]
    pen.check_dim(p)
    a = pen.scale
    if pen.variant == "none" or a == 0.0:
        return []
    eye = np.eye(p)
    zero_idx = np.flatnonzero(theta == 0.0)
    if pen.variant == "lasso":
        return [eye[:, i] for i in zero_idx]
    if pen.variant == "weighted_lasso":
        w = np.asarray(pen.weights)
        return [eye[:, i] for i in zero_idx if w[i] > 0]
    if pen.variant == "elastic_net":
        return [eye[:, i] for i in zero_idx] if pen.lam1 > 0 else []
    if pen.variant == "slope":
        _, groups = _slope_groups(pen, theta)
        out = []
        s = np.sign(theta)
        for idx, lam_blk, signed in groups:
            if idx.size == 0:
                continue
            if signed:
                if idx.size >= 2 and float(lam_blk.max() - lam_blk.min()) > 0.0:
                    for t in range(idx.size - 1):
                        i, j = idx[t], idx[t + 1]
                        out.append(s[i] * eye[:, i] - s[j] * eye[:, j])
            elif lam_blk.size and lam_blk[0] > 0.0:
                out.extend(eye[:, i] for i in idx)
        return out
    if pen.variant == "fused_lasso":
        out = []
        if pen.lam1 > 0:
            out.extend(eye[:, i] for i in zero_idx)
        if pen.lam2 > 0 and p > 1:
            d = np.diff(theta)
            for j in np.flatnonzero(d == 0.0):
                vec = np.zeros(p)
                vec[j] = -1.0
                vec[j + 1] = 1.0
                out.append(vec)
        return out
    raise InvalidPenalty(pen.variant)
