"""Dense linear algebra and deterministic random streams.

Everything downstream (penalties, solvers, Monte Carlo) goes through these
helpers so that definiteness checks and reproducibility conventions live in
one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPositiveDefinite, RankDeficientBasis

__all__ = [
    "RngStream",
    "cholesky",
    "symmetric_sqrt",
    "solve_spd",
    "sample_gaussian",
    "projector",
]

# Relative symmetry tolerance for matrices claimed symmetric.
_SYM_RTOL = 1e-12


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream: (seed, path) fully determines the draws.

    The generator is counter-based (Philox keyed through a seed sequence), so
    identical (seed, path) pairs reproduce bit-identical draws on every
    platform regardless of how many other streams run concurrently.  Derive
    per-replication streams with :meth:`child`; never share one stream across
    replications.
    """

    seed: int
    path: tuple[int, ...] = field(default_factory=tuple)

    algorithm: str = "philox"  # documented; fixed

    def __post_init__(self) -> None:
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "path", tuple(int(i) for i in self.path))
        if any(i < 0 for i in self.path):
            raise ValueError("stream indices must be nonnegative")

    def child(self, *indices: int) -> "RngStream":
        """Substream addressed by appending `indices` to this stream's path."""
        return RngStream(self.seed, self.path + tuple(indices))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


def _check_square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    scale = np.abs(m).max() if m.size else 0.0
    if scale and np.abs(m - m.T).max() > _SYM_RTOL * max(1.0, scale) * 100:
        # 100x slack: inputs assembled from products carry rounding noise.
        raise NotPositiveDefinite("matrix is not symmetric")
    return m


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L Lᵀ = m; raises if any pivot fails."""
    m = _check_square(m)
    try:
        return np.linalg.cholesky((m + m.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def symmetric_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric S ⪰ 0 with SS = m, via eigendecomposition."""
    m = _check_square(m)
    evals, vecs = np.linalg.eigh((m + m.T) / 2.0)
    if evals.size and evals[0] <= 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {evals[0]} is not positive")
    s = (vecs * np.sqrt(evals)) @ vecs.T
    return (s + s.T) / 2.0


def solve_spd(m: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve m x = b for symmetric positive definite m."""
    m = _check_square(m)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != m.shape[0]:
        raise DimensionMismatch(f"rhs length {b.shape[0]} != matrix order {m.shape[0]}")
    try:
        c, low = scipy.linalg.cho_factor((m + m.T) / 2.0, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return scipy.linalg.cho_solve((c, low), b)


def sample_gaussian(
    mean: np.ndarray,
    cov: np.ndarray,
    rng: RngStream | np.random.Generator,
    *,
    method: str = "auto",
) -> np.ndarray:
    """One draw from N(mean, cov).

    `method="auto"` uses the Cholesky factor and falls back to an
    eigendecomposition when cov is only positive *semi*definite (eigenvalues
    below 1e-12·trace are clamped to zero; anything more negative raises).
    `method="eigh"` forces the eigendecomposition path — used when the
    covariance is singular by construction, so the code path (and hence the
    draw) does not depend on rounding luck.
    """
    mean = np.asarray(mean, dtype=float)
    cov = _check_square(cov)
    if mean.shape[0] != cov.shape[0]:
        raise DimensionMismatch("mean/cov dims differ")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    z = gen.standard_normal(mean.shape[0])
    if method == "cholesky":
        return mean + cholesky(cov) @ z
    if method == "auto":
        try:
            return mean + cholesky(cov) @ z
        except NotPositiveDefinite:
            pass
    elif method != "eigh":
        raise ValueError(f"unknown method {method!r}")
    evals, vecs = np.linalg.eigh((cov + cov.T) / 2.0)
    clamp = 1e-12 * max(np.trace(cov), 0.0)
    if evals.size and evals[0] < -max(clamp, 1e-12):
        raise NotPositiveDefinite(f"eigenvalue {evals[0]} below the PSD clamp")
    evals = np.where(evals < clamp, 0.0, evals)
    return mean + (vecs * np.sqrt(evals)) @ z


def projector(basis: list[np.ndarray], dim: int | None = None) -> np.ndarray:
    """Orthogonal projector onto span(basis).

    `dim` is required when the basis is empty (projector is the zero matrix).
    Raises RankDeficientBasis when the vectors are linearly dependent.
    """
    if len(basis) == 0:
        if dim is None:
            raise DimensionMismatch("empty basis needs an explicit dimension")
        return np.zeros((dim, dim))
    b = np.column_stack([np.asarray(v, dtype=float) for v in basis])
    if dim is not None and b.shape[0] != dim:
        raise DimensionMismatch(f"basis vectors have length {b.shape[0]}, expected {dim}")
    q, r = np.linalg.qr(b)
    rdiag = np.abs(np.diag(r))
    if rdiag.min() <= 1e-10 * max(1.0, rdiag.max()):
        raise RankDeficientBasis("basis vectors are linearly dependent")
    return q @ q.T
