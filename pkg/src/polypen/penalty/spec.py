"""Penalty definitions: a max-of-linear-forms part plus a differentiable part.

Supported variants: none, lasso, weighted lasso, slope (sorted-ℓ1), fused
lasso (ℓ1 + 1-D total variation), elastic net (ℓ1 + squared ℓ2, the squared
part being the differentiable component).  A global `scale` multiplies the
whole penalty; it is the tuning knob swept in experiments.

The exponentially many linear forms are never enumerated; every operation
works from the structural closed form of the variant.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import DimensionMismatch, InvalidPenalty

__all__ = ["PenaltySpec", "value"]

_VARIANTS = ("none", "lasso", "weighted_lasso", "slope", "fused_lasso", "elastic_net")


@dataclass(frozen=True)
class PenaltySpec:
    """Declarative penalty description.

    Use the classmethod constructors; positional construction is error-prone.
    `scale` is the global multiplier applied to the entire penalty.
    """

    variant: str
    lam: float | None = None                 # lasso
    weights: tuple[float, ...] | None = None  # weighted_lasso
    lam_seq: tuple[float, ...] | None = None  # slope, length p, nonincreasing
    lam1: float | None = None                # fused_lasso / elastic_net
    lam2: float | None = None                # fused_lasso / elastic_net
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.variant not in _VARIANTS:
            raise InvalidPenalty(f"unknown variant {self.variant!r}")
        if self.scale < 0:
            raise InvalidPenalty("scale must be nonnegative")
        if self.variant == "lasso":
            if self.lam is None or self.lam <= 0:
                raise InvalidPenalty("lasso needs lam > 0")
        elif self.variant == "weighted_lasso":
            if self.weights is None or len(self.weights) == 0:
                raise InvalidPenalty("weighted_lasso needs a weight vector")
            if any(w < 0 for w in self.weights):
                raise InvalidPenalty("weights must be nonnegative")
        elif self.variant == "slope":
            if self.lam_seq is None or len(self.lam_seq) == 0:
                raise InvalidPenalty("slope needs a lambda sequence")
            if any(l < 0 for l in self.lam_seq):
                raise InvalidPenalty("slope lambdas must be nonnegative")
            if any(a < b for a, b in zip(self.lam_seq, self.lam_seq[1:])):
                raise InvalidPenalty("slope lambdas must be nonincreasing")
        elif self.variant in ("fused_lasso", "elastic_net"):
            if self.lam1 is None or self.lam2 is None:
                raise InvalidPenalty(f"{self.variant} needs lam1 and lam2")
            if self.lam1 < 0 or self.lam2 < 0:
                raise InvalidPenalty("lam1/lam2 must be nonnegative")

    # -- constructors -------------------------------------------------------

    @classmethod
    def none(cls) -> "PenaltySpec":
        return cls("none")

    @classmethod
    def lasso(cls, lam: float, scale: float = 1.0) -> "PenaltySpec":
        return cls("lasso", lam=float(lam), scale=float(scale))

    @classmethod
    def weighted_lasso(cls, weights, scale: float = 1.0) -> "PenaltySpec":
        return cls("weighted_lasso", weights=tuple(float(w) for w in weights), scale=float(scale))

    @classmethod
    def slope(cls, lam_seq, scale: float = 1.0) -> "PenaltySpec":
        return cls("slope", lam_seq=tuple(float(l) for l in lam_seq), scale=float(scale))

    @classmethod
    def fused_lasso(cls, lam1: float, lam2: float, scale: float = 1.0) -> "PenaltySpec":
        return cls("fused_lasso", lam1=float(lam1), lam2=float(lam2), scale=float(scale))

    @classmethod
    def elastic_net(cls, lam1: float, lam2: float, scale: float = 1.0) -> "PenaltySpec":
        return cls("elastic_net", lam1=float(lam1), lam2=float(lam2), scale=float(scale))

    # -- helpers -------------------------------------------------------------

    def with_scale(self, scale: float) -> "PenaltySpec":
        """Same penalty with a different global multiplier."""
        return replace(self, scale=float(scale))

    def check_dim(self, p: int) -> None:
        if self.variant == "weighted_lasso" and len(self.weights) != p:
            raise DimensionMismatch(f"weight vector length {len(self.weights)} != p={p}")
        if self.variant == "slope" and len(self.lam_seq) != p:
            raise DimensionMismatch(f"slope lambda length {len(self.lam_seq)} != p={p}")

    @property
    def has_smooth_part(self) -> bool:
        """True when the penalty carries a differentiable component."""
        return self.variant == "elastic_net" and self.lam2 > 0

    def smooth_grad(self, theta: np.ndarray) -> np.ndarray:
        """Gradient of the differentiable component (zero for pure polyhedral)."""
        theta = np.asarray(theta, dtype=float)
        if self.variant == "elastic_net":
            return 2.0 * self.scale * self.lam2 * theta
        return np.zeros_like(theta)

    def to_config(self) -> dict:
        """JSON-ready description (round-trips through the experiment config)."""
        out: dict = {"kind": self.variant, "scale": self.scale}
        if self.variant == "lasso":
            out["lam"] = self.lam
        elif self.variant == "weighted_lasso":
            out["weights"] = list(self.weights)
        elif self.variant == "slope":
            out["lam"] = list(self.lam_seq)
        elif self.variant in ("fused_lasso", "elastic_net"):
            out["lam1"] = self.lam1
            out["lam2"] = self.lam2
        return out


def value(pen: PenaltySpec, theta: np.ndarray) -> float:
    """Penalty value at theta (includes the global scale)."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise DimensionMismatch("theta must be a vector")
    p = theta.shape[0]
    pen.check_dim(p)
    a = pen.scale
    if pen.variant == "none" or a == 0.0:
        return 0.0
    if pen.variant == "lasso":
        return a * pen.lam * float(np.abs(theta).sum())
    if pen.variant == "weighted_lasso":
        return a * float(np.abs(theta) @ np.asarray(pen.weights))
    if pen.variant == "slope":
        mags = np.sort(np.abs(theta))[::-1]
        return a * float(mags @ np.asarray(pen.lam_seq))
    if pen.variant == "fused_lasso":
        tv = float(np.abs(np.diff(theta)).sum()) if p > 1 else 0.0
        return a * (pen.lam1 * float(np.abs(theta).sum()) + pen.lam2 * tv)
    if pen.variant == "elastic_net":
        return a * (pen.lam1 * float(np.abs(theta).sum()) + pen.lam2 * float(theta @ theta))
    raise InvalidPenalty(pen.variant)
