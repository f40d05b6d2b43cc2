"""Synthetic scenarios: Gaussian designs with block compound-symmetry
covariance, GLM or additive-noise responses, and the benchmark setup used
throughout the experiment harness (p = 30, six correlated blocks, logistic
responses, sorted-L1 weights from normal quantiles)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, InvalidScenario, NotPositiveDefinite
from .loss import Dataset, LossSpec, NoiseSpec
from .numerics import RngStream, cholesky
from .penalty import PenaltySpec

__all__ = [
    "DesignSpec",
    "ScenarioSpec",
    "build_covariance",
    "gen_dataset",
    "normal_quantile",
    "paper_scenario",
    "paper_penalty",
]


@dataclass(frozen=True)
class DesignSpec:
    """Row distribution of the design matrix: N(0, cov) with cov one of
    identity, m diagonal blocks of compound symmetry (unit diagonal,
    constant off-diagonal rho inside each b x b block), or an explicit SPD
    matrix.
    """

    p: int
    kind: str = "identity"  # identity | cs_blocks | explicit
    block_size: int = 0
    rho: float = 0.0
    blocks: int = 0
    matrix: np.ndarray | None = None

    def __post_init__(self) -> None:
        if int(self.p) < 1:
            raise InvalidScenario("design dimension must be positive")
        object.__setattr__(self, "p", int(self.p))
        if self.kind == "identity":
            return
        if self.kind == "cs_blocks":
            b, m = int(self.block_size), int(self.blocks)
            if b < 1 or m < 1 or b * m != self.p:
                raise InvalidScenario("block layout must tile p exactly")
            # PD iff rho in (-1/(b-1), 1); the lower bound is vacuous at b = 1
            if not (abs(self.rho) < 1.0) or (b > 1 and self.rho <= -1.0 / (b - 1)):
                raise NotPositiveDefinite(
                    f"compound symmetry needs -1/(b-1) < rho < 1, got rho={self.rho}"
                )
            object.__setattr__(self, "block_size", b)
            object.__setattr__(self, "blocks", m)
            return
        if self.kind == "explicit":
            mat = np.asarray(self.matrix, dtype=float)
            if mat.shape != (self.p, self.p):
                raise DimensionMismatch("explicit covariance must be p x p")
            cholesky(mat)  # raises NotPositiveDefinite
            object.__setattr__(self, "matrix", mat)
            return
        raise InvalidScenario(f"unknown design kind {self.kind!r}")

    @classmethod
    def identity(cls, p: int) -> "DesignSpec":
        return cls(p=p, kind="identity")

    @classmethod
    def compound_symmetry_blocks(cls, block_size: int, rho: float, blocks: int) -> "DesignSpec":
        return cls(
            p=block_size * blocks,
            kind="cs_blocks",
            block_size=block_size,
            rho=rho,
            blocks=blocks,
        )

    @classmethod
    def explicit(cls, matrix) -> "DesignSpec":
        matrix = np.asarray(matrix, dtype=float)
        return cls(p=matrix.shape[0] if matrix.ndim == 2 else 0, kind="explicit", matrix=matrix)

    def sampler(self) -> Callable[[int, np.random.Generator], np.ndarray]:
        """(count, generator) -> count rows of N(0, cov); the Cholesky factor
        is fixed once so every caller sees the same map from normals to rows."""
        L = cholesky(build_covariance(self))
        p = self.p

        def draw(count: int, gen: np.random.Generator) -> np.ndarray:
            return gen.standard_normal((count, p)) @ L.T

        return draw

    def to_config(self) -> dict:
        if self.kind == "identity":
            return {"kind": "identity", "p": self.p}
        if self.kind == "cs_blocks":
            return {
                "kind": "cs_blocks",
                "block_size": self.block_size,
                "rho": self.rho,
                "blocks": self.blocks,
            }
        return {"kind": "explicit", "matrix": np.asarray(self.matrix).tolist()}


def build_covariance(spec: DesignSpec) -> np.ndarray:
    """Dense covariance for a design spec; Kronecker assembly for the block
    kind (identity of order m times one compound-symmetry block)."""
    if spec.kind == "identity":
        return np.eye(spec.p)
    if spec.kind == "cs_blocks":
        b = spec.block_size
        block = np.full((b, b), spec.rho)
        np.fill_diagonal(block, 1.0)
        return np.kron(np.eye(spec.blocks), block)
    return np.asarray(spec.matrix, dtype=float).copy()


@dataclass(frozen=True)
class ScenarioSpec:
    """A complete data-generating recipe: design, truth, loss, noise, n.

    Noise is required by the additive-response losses (squared, huber,
    quantile) and must be omitted for the GLM losses, whose responses carry
    their own randomness.  Heavy-tailed student-t noise (df <= 2) is rejected
    only for the squared loss, which needs a finite noise variance; the
    robust losses tolerate infinite variance.
    """

    design: DesignSpec
    theta0: np.ndarray
    loss: LossSpec
    noise: NoiseSpec | None
    n: int

    def __post_init__(self) -> None:
        theta0 = np.asarray(self.theta0, dtype=float)
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "n", int(self.n))
        if theta0.ndim != 1 or theta0.size != self.design.p:
            raise DimensionMismatch("theta0 length must match the design dimension")
        if not np.all(np.isfinite(theta0)):
            raise InvalidScenario("theta0 must be finite")
        if self.n < 1:
            raise InvalidScenario("sample size must be positive")
        needs_noise = self.loss.variant in ("squared", "huber", "quantile")
        if needs_noise and self.noise is None:
            raise InvalidScenario(f"{self.loss.variant} loss needs a noise law")
        if not needs_noise and self.noise is not None:
            raise InvalidScenario(f"{self.loss.variant} responses carry their own noise")
        if (
            self.loss.variant == "squared"
            and self.noise is not None
            and self.noise.variant == "student_t"
            and self.noise.df <= 2.0
        ):
            raise InvalidScenario("squared loss needs finite noise variance (df > 2)")

    @property
    def p(self) -> int:
        return self.design.p

    def effective_noise(self) -> NoiseSpec | None:
        """Noise law actually applied to responses: the check loss assumes its
        alpha-quantile sits at zero, so quantile scenarios recenter."""
        if self.noise is not None and self.loss.variant == "quantile":
            return self.noise.recentered(self.loss.alpha)
        return self.noise

    def to_config(self) -> dict:
        out = {
            "design": self.design.to_config(),
            "theta0": self.theta0.tolist(),
            "loss": self.loss.to_config(),
            "n": self.n,
        }
        if self.noise is not None:
            out["noise"] = self.noise.to_config()
        return out


def gen_dataset(spec: ScenarioSpec, rng: RngStream) -> Dataset:
    """One synthetic dataset: X rows ~ N(0, cov), responses per the loss.

    Draw order is fixed (design first, then responses), so a given stream
    always yields the same dataset.
    """
    gen = rng.generator()
    L = cholesky(build_covariance(spec.design))
    X = gen.standard_normal((spec.n, spec.p)) @ L.T
    eta = X @ spec.theta0
    variant = spec.loss.variant
    if variant == "logistic":
        y = (gen.random(spec.n) < expit(eta)).astype(float)
    elif variant == "poisson":
        y = gen.poisson(np.exp(eta)).astype(float)
    else:
        noise = spec.effective_noise()
        y = eta + noise.sample(spec.n, gen)
    return Dataset(X, y)


# -- inverse normal CDF ----------------------------------------------------------

# Rational minimax coefficients (Acklam); three branches split at 0.02425.
_NQ_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
         1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_NQ_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
         6.680131188771972e01, -1.328068155288572e01)
_NQ_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
         -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_NQ_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
         3.754408661907416e00)
_NQ_SPLIT = 0.02425


def _normal_quantile_half(q: float) -> float:
    # 0 < q <= 0.5, so x <= 0 and the CDF residual below has no cancellation
    a, b, c, d = _NQ_A, _NQ_B, _NQ_C, _NQ_D
    if q < _NQ_SPLIT:
        r = math.sqrt(-2.0 * math.log(q))
        x = ((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]
        x /= (((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0
    else:
        r = q - 0.5
        s = r * r
        x = (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * r
        x /= ((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0
    # one Halley step on the exact CDF residual: ~1e-9 -> near machine precision
    if x * x / 2.0 > 700.0:  # exp would overflow; raw approximation is all we get
        return x
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - q
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


def _normal_quantile_scalar(q: float) -> float:
    if not 0.0 < q < 1.0:
        raise ValueError("quantile argument must lie strictly inside (0, 1)")
    if q == 0.5:
        return 0.0
    if q > 0.5:
        # 1-q is exact here, and reflection avoids upper-tail cancellation
        return -_normal_quantile_half(1.0 - q)
    return _normal_quantile_half(q)


def normal_quantile(q):
    """Standard normal quantile function, accurate to better than 1e-12.

    Rational approximation with one Halley refinement on the erfc-based CDF
    residual; accepts scalars or arrays and never calls into optional
    special-function libraries, so the values are bit-stable across builds.
    """
    arr = np.asarray(q, dtype=float)
    if arr.ndim == 0:
        return _normal_quantile_scalar(float(arr))
    flat = np.array([_normal_quantile_scalar(float(v)) for v in arr.ravel()])
    return flat.reshape(arr.shape)


# -- benchmark scenario ----------------------------------------------------------


def paper_scenario(n: int = 1000) -> ScenarioSpec:
    """The benchmark setup: p = 30, six compound-symmetry blocks of size 5
    with rho = 0.8, theta0 = (-2 x5, 1 x5, 0 x20), logistic responses."""
    design = DesignSpec.compound_symmetry_blocks(block_size=5, rho=0.8, blocks=6)
    theta0 = np.concatenate([np.full(5, -2.0), np.ones(5), np.zeros(20)])
    return ScenarioSpec(design=design, theta0=theta0, loss=LossSpec.logistic(), noise=None, n=n)


def paper_penalty() -> PenaltySpec:
    """Sorted-L1 weights for the benchmark: lam_j = normal_quantile(1 - 0.2 j / (2p))
    for j = 1..30 at unit scale; sweeps multiply through `with_scale`."""
    j = np.arange(1, 31)
    lam = normal_quantile(1.0 - 0.2 * j / 60.0)
    return PenaltySpec.slope(lam)
