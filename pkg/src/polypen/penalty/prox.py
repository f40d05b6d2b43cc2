"""Proximal operators for every penalty variant.

All of them are exact (no inner iterations): soft thresholding, a
stack-based pool-adjacent-violators pass for sorted-ℓ1 terms, and a
segment-fusion path for the 1-D total-variation part of the fused lasso.
Exactness matters downstream — coordinates that tie do so in exact floating
point, which is what lets pattern extraction use equality instead of fuzz.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, InvalidPenalty
from .spec import PenaltySpec

__all__ = [
    "prox",
    "soft_threshold",
    "sorted_l1_prox",
    "ordered_weight_prox",
    "tv1d_prox",
]


def soft_threshold(v: np.ndarray, t) -> np.ndarray:
    """Componentwise sign(v) * max(|v| - t, 0); t may be scalar or vector."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _pava_nonincreasing(z: np.ndarray) -> np.ndarray:
    """Project z onto the nonincreasing cone (isotonic regression).

    Pooled entries share the exact same float: each block's value is written
    from a single sum/size division.
    """
    n = z.shape[0]
    val = np.empty(n)
    size = np.empty(n, dtype=np.intp)
    k = -1
    for x in z:
        k += 1
        val[k] = x
        size[k] = 1
        # merge while the running tail fails to decrease
        while k > 0 and val[k - 1] <= val[k]:
            tot = val[k - 1] * size[k - 1] + val[k] * size[k]
            size[k - 1] += size[k]
            val[k - 1] = tot / size[k - 1]
            k -= 1
    out = np.empty(n)
    pos = 0
    for j in range(k + 1):
        out[pos : pos + size[j]] = val[j]
        pos += size[j]
    return out


def ordered_weight_prox(z: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Prox of h(x) = sum_t mu_t * x_(t), x_(1) >= x_(2) >= ... (no absolute values).

    mu must be nonincreasing.  The minimizer preserves the ordering of z, so
    it is PAV applied to (sorted z) - mu, unsorted back.  Tied inputs always
    end up pooled because mu is nonincreasing.
    """
    z = np.asarray(z, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if z.shape != mu.shape:
        raise DimensionMismatch("z and mu must have equal length")
    order = np.argsort(-z, kind="stable")
    w = _pava_nonincreasing(z[order] - mu)
    out = np.empty_like(z)
    out[order] = w
    return out


def sorted_l1_prox(v: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Prox of the sorted-ℓ1 norm sum_t lam_t |v|_(t) with lam nonincreasing >= 0."""
    v = np.asarray(v, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if v.shape != lam.shape:
        raise DimensionMismatch("v and lam must have equal length")
    sgn = np.sign(v)
    a = np.abs(v)
    order = np.argsort(-a, kind="stable")
    w = _pava_nonincreasing(a[order] - lam)
    w = np.maximum(w, 0.0)
    out = np.empty_like(a)
    out[order] = w
    return sgn * out


def tv1d_prox(v: np.ndarray, lam: float) -> np.ndarray:
    """Exact minimizer of 1/2 ||x - v||^2 + lam * sum_i |x_{i+1} - x_i|.

    Follows the solution path in lam: segments of constant value move with
    piecewise-linear trajectories and only ever merge as lam grows, so
    stepping from one collision to the next and stopping at the target lam
    yields the exact solution with exact within-segment ties.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    if n <= 1 or lam <= 0.0:
        return v.copy()

    # segment state, merged in place by index lists
    starts: list[int] = []
    sizes: list[int] = []
    vals: list[float] = []
    i = 0
    while i < n:  # pool exactly-equal neighbours up front
        j = i
        while j + 1 < n and v[j + 1] == v[i]:
            j += 1
        starts.append(i)
        sizes.append(j - i + 1)
        vals.append(float(v[i]))
        i = j + 1

    lam_cur = 0.0
    while len(vals) > 1 and lam_cur < lam:
        m = len(vals)
        # boundary directions: sig[j] = sign(vals[j+1] - vals[j]), nonzero by construction
        sig = [1.0 if vals[j + 1] > vals[j] else -1.0 for j in range(m - 1)]
        vel = []
        for j in range(m):
            left = sig[j - 1] if j > 0 else 0.0
            right = sig[j] if j < m - 1 else 0.0
            vel.append((right - left) / sizes[j])
        # earliest collision of adjacent segments
        best = None
        best_j = -1
        for j in range(m - 1):
            dv = vel[j] - vel[j + 1]
            gap = vals[j + 1] - vals[j]
            # they approach iff gap and relative velocity dv share sign
            if dv * gap > 0.0:
                hit = lam_cur + gap / dv
                if best is None or hit < best:
                    best = hit
                    best_j = j
        if best is None or best >= lam:
            break
        step = best - lam_cur
        for j in range(m):
            vals[j] += step * vel[j]
        lam_cur = best
        # merge the colliding pair; share one exact value
        merged = vals[best_j]
        sizes[best_j] += sizes[best_j + 1]
        vals[best_j] = merged
        del starts[best_j + 1], sizes[best_j + 1], vals[best_j + 1]

    # advance the surviving segments to the target lam
    m = len(vals)
    if m > 1:
        sig = [1.0 if vals[j + 1] > vals[j] else -1.0 for j in range(m - 1)]
    out = np.empty(n)
    rest = lam - lam_cur
    for j in range(m):
        left = sig[j - 1] if j > 0 else 0.0
        right = sig[j] if j < m - 1 else 0.0
        x = vals[j] + rest * (right - left) / sizes[j] if m > 1 else vals[j]
        out[starts[j] : starts[j] + sizes[j]] = x
    return out


def prox(pen: PenaltySpec, v: np.ndarray, t: float) -> np.ndarray:
    """Proximal map of t * (scaled penalty) at v; exact for every variant."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch("v must be a vector")
    if t < 0:
        raise ValueError("step t must be nonnegative")
    pen.check_dim(v.shape[0])
    a = t * pen.scale
    if pen.variant == "none" or a == 0.0:
        return v.copy()
    if pen.variant == "lasso":
        return soft_threshold(v, a * pen.lam)
    if pen.variant == "weighted_lasso":
        return soft_threshold(v, a * np.asarray(pen.weights))
    if pen.variant == "slope":
        return sorted_l1_prox(v, a * np.asarray(pen.lam_seq))
    if pen.variant == "fused_lasso":
        return soft_threshold(tv1d_prox(v, a * pen.lam2), a * pen.lam1)
    if pen.variant == "elastic_net":
        return soft_threshold(v, a * pen.lam1) / (1.0 + 2.0 * a * pen.lam2)
    raise InvalidPenalty(pen.variant)
