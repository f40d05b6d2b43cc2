"""Loss families with weak gradients and asymptotic moment pairs.

Variants: squared, logistic, poisson (GLM form psi(x't) - y*x't), huber, and
quantile (check loss).  Each loss owns two population matrices at the truth:
C (Hessian of the risk) and C_delta (covariance of the score).  Closed forms
are provided where they exist; a chunked Monte Carlo estimator covers the
rest.

Note on Huber/quantile moment assignment: the Hessian carries the *indicator*
weight (gamma_k = P(|eps| < k), resp. the density at zero), while the score
covariance carries the truncated second moment delta_k, resp. alpha(1-alpha).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, stats
from scipy.special import expit

from .errors import (
    DimensionMismatch,
    InvalidResponse,
    InvalidScenario,
    NoClosedForm,
    SingularEstimate,
)
from .numerics import RngStream

__all__ = [
    "LossSpec",
    "NoiseSpec",
    "Dataset",
    "MomentPair",
    "loss_value",
    "loss_grad",
    "mean_value_and_grad",
    "quantile_smoothed",
    "moments_analytic",
    "moments_mc",
]


@dataclass(frozen=True)
class LossSpec:
    """One of: squared, logistic(tau), poisson, huber(k), quantile(alpha)."""

    variant: str
    k: float | None = None      # huber knot
    alpha: float | None = None  # quantile level
    tau: float = 1.0            # GLM dispersion, enters C_delta = C / tau

    def __post_init__(self) -> None:
        if self.variant not in ("squared", "logistic", "poisson", "huber", "quantile"):
            raise InvalidScenario(f"unknown loss {self.variant!r}")
        if self.variant == "huber" and (self.k is None or self.k <= 0):
            raise InvalidScenario("huber needs k > 0")
        if self.variant == "quantile" and (
            self.alpha is None or not 0.0 < self.alpha < 1.0
        ):
            raise InvalidScenario("quantile needs alpha in (0, 1)")
        if self.tau <= 0:
            raise InvalidScenario("tau must be positive")

    @classmethod
    def squared(cls) -> "LossSpec":
        return cls("squared")

    @classmethod
    def logistic(cls, tau: float = 1.0) -> "LossSpec":
        return cls("logistic", tau=tau)

    @classmethod
    def poisson(cls) -> "LossSpec":
        return cls("poisson")

    @classmethod
    def huber(cls, k: float) -> "LossSpec":
        return cls("huber", k=float(k))

    @classmethod
    def quantile(cls, alpha: float) -> "LossSpec":
        return cls("quantile", alpha=float(alpha))

    def to_config(self) -> dict:
        out: dict = {"kind": self.variant}
        if self.variant == "huber":
            out["k"] = self.k
        elif self.variant == "quantile":
            out["alpha"] = self.alpha
        elif self.variant == "logistic" and self.tau != 1.0:
            out["tau"] = self.tau
        return out


@dataclass(frozen=True)
class NoiseSpec:
    """Additive-noise law with closed-form density/CDF/quantile.

    `shift` subtracts a constant from the base law; `recentered(alpha)` uses
    it to put the alpha-quantile exactly at zero, which is what the check
    loss assumes of its noise.
    """

    variant: str
    sigma: float = 1.0   # gaussian std
    scale: float = 1.0   # laplace / student-t scale
    df: float = 1.0      # student-t degrees of freedom
    shift: float = 0.0

    def __post_init__(self) -> None:
        if self.variant not in ("gaussian", "laplace", "student_t"):
            raise InvalidScenario(f"unknown noise {self.variant!r}")
        if self.variant == "gaussian" and self.sigma < 0:
            # sigma = 0 is the degenerate noiseless case (y = X theta0 exactly)
            raise InvalidScenario("gaussian sigma must be nonnegative")
        if self.variant in ("laplace", "student_t") and self.scale <= 0:
            raise InvalidScenario("scale must be positive")
        if self.variant == "student_t" and self.df <= 0:
            raise InvalidScenario("student_t df must be positive")

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "NoiseSpec":
        return cls("gaussian", sigma=float(sigma))

    @classmethod
    def laplace(cls, scale: float = 1.0) -> "NoiseSpec":
        return cls("laplace", scale=float(scale))

    @classmethod
    def student_t(cls, df: float, scale: float = 1.0) -> "NoiseSpec":
        return cls("student_t", df=float(df), scale=float(scale))

    def _base(self):
        if self.variant == "gaussian":
            return stats.norm(scale=self.sigma)
        if self.variant == "laplace":
            return stats.laplace(scale=self.scale)
        return stats.t(df=self.df, scale=self.scale)

    def density(self, t: float) -> float:
        return float(self._base().pdf(t + self.shift))

    def cdf(self, t: float) -> float:
        return float(self._base().cdf(t + self.shift))

    def ppf(self, q: float) -> float:
        return float(self._base().ppf(q)) - self.shift

    @property
    def variance(self) -> float:
        if self.variant == "gaussian":
            return self.sigma**2
        if self.variant == "laplace":
            return 2.0 * self.scale**2
        if self.df > 2.0:
            return self.scale**2 * self.df / (self.df - 2.0)
        return float("inf")

    def recentered(self, alpha: float) -> "NoiseSpec":
        """Shifted copy whose alpha-quantile is exactly zero."""
        base_q = float(self._base().ppf(alpha))
        return NoiseSpec(self.variant, self.sigma, self.scale, self.df, base_q)

    def sample(self, size: int, gen: np.random.Generator) -> np.ndarray:
        if self.variant == "gaussian":
            out = gen.normal(0.0, self.sigma, size)
        elif self.variant == "laplace":
            out = gen.laplace(0.0, self.scale, size)
        else:
            out = self.scale * gen.standard_t(self.df, size)
        return out - self.shift

    def to_config(self) -> dict:
        out: dict = {"kind": self.variant}
        if self.variant == "gaussian":
            out["sigma"] = self.sigma
        elif self.variant == "laplace":
            out["scale"] = self.scale
        else:
            out["df"] = self.df
            if self.scale != 1.0:
                out["scale"] = self.scale
        if self.shift:
            out["shift"] = self.shift
        return out


@dataclass(frozen=True)
class Dataset:
    """Design rows x_i and responses y_i; validated against the loss at fit time."""

    design: np.ndarray
    response: np.ndarray

    def __post_init__(self) -> None:
        design = np.asarray(self.design, dtype=float)
        response = np.asarray(self.response, dtype=float)
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "response", response)
        if design.ndim != 2 or response.ndim != 1:
            raise DimensionMismatch("design must be n x p, response length n")
        if design.shape[0] != response.shape[0] or design.shape[0] < 1:
            raise DimensionMismatch("design and response row counts differ")
        if not (np.isfinite(design).all() and np.isfinite(response).all()):
            raise InvalidResponse("non-finite entries in data")

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    def validate_for(self, loss: LossSpec) -> None:
        y = self.response
        if loss.variant == "logistic" and not np.all((y == 0.0) | (y == 1.0)):
            raise InvalidResponse("logistic responses must lie in {0, 1}")
        if loss.variant == "poisson" and (np.any(y < 0) or np.any(y != np.floor(y))):
            raise InvalidResponse("poisson responses must be nonnegative integers")


@dataclass(frozen=True)
class MomentPair:
    """Risk Hessian C and score covariance C_delta at the truth.

    Monte Carlo estimates carry elementwise standard errors and the draw
    count; closed forms leave those fields as None.
    """

    C: np.ndarray
    C_delta: np.ndarray
    se_C: np.ndarray | None = None
    se_C_delta: np.ndarray | None = None
    draws: int | None = None


# -- pointwise values & gradients ----------------------------------------------


def _check_xy(x, theta):
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if x.shape != theta.shape or x.ndim != 1:
        raise DimensionMismatch("x and theta must be vectors of equal length")
    return x, theta


def _huber(r: np.ndarray, k: float) -> np.ndarray:
    a = np.abs(r)
    return np.where(a <= k, 0.5 * r * r, k * (a - 0.5 * k))


def _check_value(r: np.ndarray, alpha: float) -> np.ndarray:
    return np.where(r > 0, alpha * r, (alpha - 1.0) * r)


def loss_value(loss: LossSpec, y: float, x, theta) -> float:
    """Single-observation loss l(y, x, theta)."""
    x, theta = _check_xy(x, theta)
    eta = float(x @ theta)
    if loss.variant == "squared":
        return 0.5 * eta * eta - y * eta
    if loss.variant == "logistic":
        if y not in (0.0, 1.0):
            raise InvalidResponse("logistic response must be 0 or 1")
        return float(np.logaddexp(0.0, eta)) - y * eta
    if loss.variant == "poisson":
        if y < 0 or y != np.floor(y):
            raise InvalidResponse("poisson response must be a nonnegative integer")
        return float(np.exp(eta)) - y * eta
    r = y - eta
    if loss.variant == "huber":
        return float(_huber(np.asarray(r), loss.k))
    return float(_check_value(np.asarray(r), loss.alpha))


def loss_grad(loss: LossSpec, y: float, x, theta) -> np.ndarray:
    """A subgradient of theta -> l(y, x, theta).

    Kinks: huber uses the continuous clipped score; the check loss takes the
    r <= 0 branch at the kink.
    """
    x, theta = _check_xy(x, theta)
    eta = float(x @ theta)
    if loss.variant == "squared":
        return x * (eta - y)
    if loss.variant == "logistic":
        if y not in (0.0, 1.0):
            raise InvalidResponse("logistic response must be 0 or 1")
        return x * (float(expit(eta)) - y)
    if loss.variant == "poisson":
        if y < 0 or y != np.floor(y):
            raise InvalidResponse("poisson response must be a nonnegative integer")
        return x * (float(np.exp(eta)) - y)
    r = y - eta
    if loss.variant == "huber":
        return -x * float(np.clip(r, -loss.k, loss.k))
    g = (1.0 - loss.alpha) if r <= 0 else -loss.alpha
    return x * g


def mean_value_and_grad(loss: LossSpec, data: Dataset, theta) -> tuple[float, np.ndarray]:
    """(1/n) sum_i l(y_i, x_i, theta) and its (sub)gradient, vectorized."""
    theta = np.asarray(theta, dtype=float)
    X, y = data.design, data.response
    if theta.shape != (data.p,):
        raise DimensionMismatch("theta has wrong length")
    eta = X @ theta
    n = data.n
    if loss.variant == "squared":
        w = eta - y
        return float(np.mean(0.5 * eta * eta - y * eta)), X.T @ w / n
    if loss.variant == "logistic":
        w = expit(eta) - y
        return float(np.mean(np.logaddexp(0.0, eta) - y * eta)), X.T @ w / n
    if loss.variant == "poisson":
        ex = np.exp(eta)
        return float(np.mean(ex - y * eta)), X.T @ (ex - y) / n
    r = y - eta
    if loss.variant == "huber":
        return float(np.mean(_huber(r, loss.k))), X.T @ (-np.clip(r, -loss.k, loss.k)) / n
    w = np.where(r <= 0, 1.0 - loss.alpha, -loss.alpha)
    return float(np.mean(_check_value(r, loss.alpha))), X.T @ w / n


def quantile_smoothed(r: np.ndarray, alpha: float, m: float) -> tuple[np.ndarray, np.ndarray]:
    """Moreau envelope of the check loss and its derivative, parameter m > 0."""
    lo, hi = -(1.0 - alpha) * m, alpha * m
    d = np.clip(r / m, -(1.0 - alpha), alpha)
    val = np.where(
        r > hi,
        alpha * r - 0.5 * alpha**2 * m,
        np.where(r < lo, (alpha - 1.0) * r - 0.5 * (1.0 - alpha) ** 2 * m, 0.5 * r * r / m),
    )
    return val, d


# -- moments --------------------------------------------------------------------


def _huber_weights(k: float, noise: NoiseSpec) -> tuple[float, float]:
    """gamma_k = P(|eps| < k); delta_k = E[eps^2 1_{|eps|<k}] + k^2 P(|eps| > k)."""
    gamma = noise.cdf(k) - noise.cdf(-k)
    # Break points keep the adaptive rule from overlooking the central mass
    # when k dwarfs the noise scale (k = 1e6 against a unit Gaussian leaves
    # the 21-point start-up grid sampling only zero density).
    s = abs(noise.ppf(0.975))
    if not np.isfinite(s) or s <= 0.0:
        s = 1.0
    ladder: list[float] = []
    while s < k:
        ladder.append(s)
        s *= 10.0
    pts = sorted({0.0, *ladder, *(-q for q in ladder)}) or None
    trunc, _ = integrate.quad(
        lambda t: t * t * noise.density(t),
        -k,
        k,
        points=pts,
        epsabs=1e-10,
        epsrel=1e-10,
        limit=200,
    )
    delta = trunc + k * k * (1.0 - gamma)
    return float(gamma), float(delta)


def moments_analytic(loss: LossSpec, Exx, theta0, noise: NoiseSpec | None) -> MomentPair:
    """Closed-form (C, C_delta) where available; NoClosedForm otherwise.

    Squared/huber/quantile need the noise law; logistic/poisson admit a
    closed form only at theta0 = 0, where the curvature is constant.
    """
    Exx = np.asarray(Exx, dtype=float)
    theta0 = np.asarray(theta0, dtype=float)
    if Exx.shape != (theta0.size, theta0.size):
        raise DimensionMismatch("Exx must be p x p")
    if loss.variant == "squared":
        if noise is None:
            raise NoClosedForm("squared loss needs a noise law for sigma^2")
        s2 = noise.variance
        if not np.isfinite(s2):
            raise NoClosedForm("noise variance is infinite")
        return MomentPair(C=Exx.copy(), C_delta=s2 * Exx)
    if loss.variant == "logistic":
        if np.any(theta0 != 0.0):
            raise NoClosedForm("logistic moments in closed form only at theta0 = 0")
        C = Exx / 4.0
        return MomentPair(C=C, C_delta=C / loss.tau)
    if loss.variant == "poisson":
        if np.any(theta0 != 0.0):
            raise NoClosedForm("poisson moments in closed form only at theta0 = 0")
        return MomentPair(C=Exx.copy(), C_delta=Exx / loss.tau)
    if noise is None:
        raise NoClosedForm(f"{loss.variant} moments need the noise law")
    if loss.variant == "huber":
        gamma, delta = _huber_weights(loss.k, noise)
        return MomentPair(C=gamma * Exx, C_delta=delta * Exx)
    # quantile: the theory places the alpha-quantile of the noise at zero
    if abs(noise.cdf(0.0) - loss.alpha) > 1e-8:
        raise NoClosedForm(
            "quantile moments require P(eps <= 0) = alpha; use NoiseSpec.recentered"
        )
    f0 = noise.density(0.0)
    return MomentPair(C=f0 * Exx, C_delta=loss.alpha * (1.0 - loss.alpha) * Exx)


_CHUNK = 65536


def moments_mc(
    loss: LossSpec,
    design_sampler: Callable[[int, np.random.Generator], np.ndarray],
    noise: NoiseSpec | None,
    theta0,
    draws: int,
    rng: RngStream,
) -> MomentPair:
    """Monte Carlo (C, C_delta) with elementwise standard errors.

    Accumulation runs over fixed-size chunks with one child stream per chunk,
    so the result does not depend on how the work is scheduled.
    """
    theta0 = np.asarray(theta0, dtype=float)
    if draws < 1:
        raise ValueError("draws must be >= 1")
    p = theta0.size
    sum_h = np.zeros((p, p))
    sq_h = np.zeros((p, p))
    sum_s = np.zeros((p, p))
    sq_s = np.zeros((p, p))
    done = 0
    chunk_index = 0
    while done < draws:
        m = min(_CHUNK, draws - done)
        gen = rng.child(chunk_index).generator()
        X = np.asarray(design_sampler(m, gen), dtype=float)
        if X.shape != (m, p):
            raise DimensionMismatch("design_sampler returned wrong shape")
        eta = X @ theta0
        if loss.variant in ("squared", "huber", "quantile"):
            if noise is None:
                raise NoClosedForm(f"{loss.variant} Monte Carlo needs a noise law")
            eps = noise.sample(m, gen)
            if loss.variant == "squared":
                hw = np.ones(m)
                sc = -eps
            elif loss.variant == "huber":
                hw = (np.abs(eps) < loss.k).astype(float)
                sc = -np.clip(eps, -loss.k, loss.k)
            else:
                hw = np.full(m, noise.density(0.0))
                sc = np.where(eps <= 0, 1.0 - loss.alpha, -loss.alpha)
        elif loss.variant == "logistic":
            prob = expit(eta)
            yb = (gen.random(m) < prob).astype(float)
            hw = prob * (1.0 - prob)
            sc = prob - yb
        else:  # poisson
            lam = np.exp(eta)
            yb = gen.poisson(lam).astype(float)
            hw = lam
            sc = lam - yb
        h_terms = np.einsum("ni,nj->nij", X, X) * hw[:, None, None]
        s_rows = X * sc[:, None]
        s_terms = np.einsum("ni,nj->nij", s_rows, s_rows)
        sum_h += h_terms.sum(axis=0)
        sq_h += (h_terms**2).sum(axis=0)
        sum_s += s_terms.sum(axis=0)
        sq_s += (s_terms**2).sum(axis=0)
        done += m
        chunk_index += 1
    C = sum_h / draws
    C_delta = sum_s / draws
    C = 0.5 * (C + C.T)
    C_delta = 0.5 * (C_delta + C_delta.T)
    var_h = np.maximum(sq_h / draws - (sum_h / draws) ** 2, 0.0)
    var_s = np.maximum(sq_s / draws - (sum_s / draws) ** 2, 0.0)
    se_C = np.sqrt(var_h / draws)
    se_Cd = np.sqrt(var_s / draws)
    try:
        np.linalg.cholesky(C + 0.0)
    except np.linalg.LinAlgError as exc:
        raise SingularEstimate("estimated C is not positive definite") from exc
    if loss.variant in ("logistic", "poisson") and loss.tau != 1.0:
        C_delta = C_delta / loss.tau
        se_Cd = se_Cd / loss.tau
    return MomentPair(C=C, C_delta=C_delta, se_C=se_C, se_C_delta=se_Cd, draws=draws)
