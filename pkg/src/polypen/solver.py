"""Proximal-gradient solvers for the finite-sample and limiting objectives.

Both problems share one accelerated proximal gradient core with monotone
restarts.  The finite-sample objective backtracks on the smooth part; the
limiting objective is an exact quadratic, so the step and momentum come from
the extreme eigenvalues of C.  The nondifferentiable check loss is handled
by Moreau-smoothing continuation: solve a sequence of smoothed problems with
decreasing parameter, warm-starting each from the last.

Convergence is certified, not assumed: the loop stops on a cheap gradient-map
criterion, then the subdifferential distance (`kkt_residual`) must confirm
stationarity; if it does not, the loop resumes with a tighter target.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite, SeparableData
from .loss import Dataset, LossSpec, mean_value_and_grad, quantile_smoothed
from .numerics import solve_spd
from .penalty import DirectionalPenalty, PenaltySpec
from .penalty import prox as pen_prox
from .penalty import subdiff_distance as pen_subdiff_distance
from .penalty import value as pen_value

__all__ = ["SolveOptions", "SolveReport", "fit", "minimize_limit", "prox_two_step", "kkt_residual"]

_DIVERGE_NORM = 1e6


@dataclass(frozen=True)
class SolveOptions:
    max_iter: int = 50_000
    tol: float = 1e-9          # relative gradient-map / KKT target
    shrink: float = 0.5        # backtracking factor
    step: float = 1.0          # initial step size
    smooth_init: float = 1e-1  # first smoothing parameter (check loss)
    smooth_floor: float = 1e-7  # last smoothing parameter
    smooth_factor: float = 0.1  # geometric decrement between stages

    def __post_init__(self) -> None:
        if self.max_iter < 1 or self.tol <= 0 or self.step <= 0:
            raise ValueError("max_iter, tol, step must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0.0 < self.smooth_floor <= self.smooth_init:
            raise ValueError("need 0 < smooth_floor <= smooth_init")
        if not 0.0 < self.smooth_factor < 1.0:
            raise ValueError("smooth_factor must lie in (0, 1)")


@dataclass(frozen=True)
class SolveReport:
    minimizer: np.ndarray
    iterations: int
    objective: float
    kkt: float
    converged: bool
    separable: bool = False


def kkt_residual(theta, smooth_grad, pen, scale: float) -> float:
    """Euclidean distance from -smooth_grad/scale to the penalty
    subdifferential at theta; zero exactly at stationary points.

    `pen` may be a PenaltySpec or a DirectionalPenalty; `scale` is the
    multiplier the penalty enters the objective with (n^{-1/2} for fits,
    1 for the limit problem).
    """
    theta = np.asarray(theta, dtype=float)
    smooth_grad = np.asarray(smooth_grad, dtype=float)
    if theta.shape != smooth_grad.shape:
        raise DimensionMismatch("theta and smooth_grad must match")
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    if scale == 0.0:
        return float(np.linalg.norm(smooth_grad))
    v = -smooth_grad / scale
    if isinstance(pen, DirectionalPenalty):
        return pen.subdiff_distance(theta, v)
    return pen_subdiff_distance(pen, theta, v)


def _apg(
    x0: np.ndarray,
    smooth,                    # theta -> (value, grad)
    prox_step,                 # (v, t) -> prox of t * nonsmooth at v
    nonsmooth_value,           # theta -> penalty part of the objective
    opts: SolveOptions,
    gm_tol: float,
    iter_budget: int,
    *,
    fixed_step: float | None = None,
    momentum: float | None = None,
    diverge_check: bool = False,
    t0: float | None = None,
):
    """Accelerated proximal gradient with monotone restarts.

    Returns (x, iterations_used, diverged, stalled, step).  Backtracking
    shrinks the step until sufficient decrease holds and regrows it by one
    shrink factor after a clean accept, so the step tracks the local curvature
    in both directions; callers thread it through continuation stages.
    `stalled` means a plain proximal step from the incumbent could not
    decrease the objective any further — the floating-point floor.
    """

    def back_step(z, t):
        """Prox step from z, backtracking t until sufficient decrease holds."""
        gz, grad = smooth(z)
        slack = 64.0 * np.finfo(float).eps * max(1.0, abs(gz))
        shrunk = False
        while True:
            cand = prox_step(z - t * grad, t)
            if fixed_step is not None:
                return cand, t, False
            diff = cand - z
            bound = gz + grad @ diff + 0.5 * float(diff @ diff) / t
            if smooth(cand)[0] <= bound + slack or t <= 1e-18 * opts.step:
                return cand, t, shrunk
            t *= opts.shrink
            shrunk = True

    x = x0.copy()
    y = x.copy()
    Fx = smooth(x)[0] + nonsmooth_value(x)
    if fixed_step is not None:
        t = fixed_step
    else:
        t = opts.step if t0 is None else t0
    tk = 1.0
    iters = 0
    grow = False
    while iters < iter_budget:
        iters += 1
        # objective comparisons allow rounding creep; monotone only up to ulps
        slack = 1e-14 * max(1.0, abs(Fx))
        if grow:
            t /= opts.shrink
        x_new, t, shrunk = back_step(y, t)
        gm = float(np.linalg.norm(y - x_new)) / t
        F_new = smooth(x_new)[0] + nonsmooth_value(x_new)
        if F_new > Fx + slack:
            # monotone restart: plain proximal step from the incumbent
            tk = 1.0
            y = x.copy()
            x_new, t, shrunk = back_step(y, t)
            gm = float(np.linalg.norm(y - x_new)) / t
            F_new = smooth(x_new)[0] + nonsmooth_value(x_new)
            if F_new > Fx + slack:
                return x, iters, False, True, t
        # regrow only on clean accepts that still make real progress, so the
        # step can climb on flat saturating objectives but settles (and then
        # only shrinks) once decreases reach the rounding floor
        grow = fixed_step is None and not shrunk and (Fx - F_new) > 10.0 * slack
        if momentum is not None:
            beta = momentum
        else:
            if float((y - x_new) @ (x_new - x)) > 0.0:
                tk = 1.0  # extrapolation points uphill: drop the momentum
            tk_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
            beta = (tk - 1.0) / tk_next
            tk = tk_next
        y = x_new + beta * (x_new - x)
        x, Fx = x_new, F_new
        if diverge_check and float(np.max(np.abs(x))) > _DIVERGE_NORM:
            return x, iters, True, False, t
        if gm <= gm_tol:
            break
    return x, iters, False, False, t


def fit(
    data: Dataset,
    loss: LossSpec,
    pen: PenaltySpec,
    opts: SolveOptions = SolveOptions(),
    *,
    x0: np.ndarray | None = None,
) -> SolveReport:
    """Minimize (1/n) sum_i l(y_i, x_i, theta) + n^{-1/2} * value(pen, theta).

    Starts at zero unless a warm start is given.  The report's `kkt` field is
    the subdifferential distance at the returned point; `converged` is set
    only when that certificate meets the tolerance.
    """
    data.validate_for(loss)
    n, p = data.n, data.p
    pen.check_dim(p)
    scale = 1.0 / np.sqrt(n)
    x = np.zeros(p) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.shape != (p,):
        raise DimensionMismatch("warm start has wrong length")

    def prox_step(v, t):
        return pen_prox(pen, v, t * scale)

    def nonsmooth_value(theta):
        return scale * pen_value(pen, theta)

    X, y = data.design, data.response
    ref = max(1.0, float(np.linalg.norm(mean_value_and_grad(loss, data, x)[1])))
    gm_tol = opts.tol * ref
    # the certificate lives in penalty units (smooth gradient / scale)
    kkt_target = opts.tol * ref / scale
    iters_total = 0
    separable = False

    if loss.variant == "quantile":
        alpha = loss.alpha
        stages = []
        m = opts.smooth_init
        while m > opts.smooth_floor * (1.0 + 1e-12):
            stages.append(m)
            m *= opts.smooth_factor
        stages.append(opts.smooth_floor)

        def smooth_at(m):
            def smooth(theta):
                r = y - X @ theta
                val, d = quantile_smoothed(r, alpha, m)
                return float(np.mean(val)), X.T @ (-d) / n
            return smooth

        t_carry: float | None = None
        for m in stages[:-1]:
            budget = max(opts.max_iter - iters_total, 1)
            # stage accuracy only needs to track the smoothing level
            x, used, _, _, t_carry = _apg(
                x, smooth_at(m), prox_step, nonsmooth_value, opts,
                max(gm_tol, m * 1e-3), min(budget, 2000), t0=t_carry,
            )
            iters_total += used
        smooth = smooth_at(stages[-1])
    else:
        t_carry = None

        def smooth(theta):
            return mean_value_and_grad(loss, data, theta)

    converged = False
    while iters_total < opts.max_iter:
        budget = opts.max_iter - iters_total
        x, used, diverged, stalled, t_carry = _apg(
            x, smooth, prox_step, nonsmooth_value, opts, gm_tol, budget,
            diverge_check=loss.variant == "logistic", t0=t_carry,
        )
        iters_total += used
        if diverged:
            separable = True
            warnings.warn(
                SeparableData("logistic fit diverged; data look separable"), stacklevel=2
            )
            break
        kkt = kkt_residual(x, smooth(x)[1], pen, scale)
        if kkt <= kkt_target:
            converged = True
            break
        if stalled:
            break  # floating-point floor reached; report honestly
        gm_tol *= 0.1

    final_grad = smooth(x)[1]
    kkt = kkt_residual(x, final_grad, pen, scale)
    if loss.variant == "quantile":
        # report the exact check-loss objective, not the smoothed surrogate
        obj = mean_value_and_grad(loss, data, x)[0] + nonsmooth_value(x)
    else:
        obj = smooth(x)[0] + nonsmooth_value(x)
    converged = converged and kkt <= kkt_target and not separable
    return SolveReport(x, iters_total, float(obj), float(kkt), converged, separable)


def minimize_limit(
    C: np.ndarray,
    W: np.ndarray,
    dirpen: DirectionalPenalty,
    opts: SolveOptions = SolveOptions(),
) -> SolveReport:
    """Minimize V(u) = (1/2) u'Cu - u'W + dirpen(u); C must be positive definite.

    The quadratic part is exact, so the step is 1/L and the momentum constant
    comes from the condition number; without blocks the solution is one
    linear solve.
    """
    C = np.asarray(C, dtype=float)
    W = np.asarray(W, dtype=float)
    p = W.shape[0]
    if C.shape != (p, p):
        raise DimensionMismatch("C must be p x p for W of length p")
    if dirpen.dim != p:
        raise DimensionMismatch("directional penalty has wrong dimension")

    if not dirpen.blocks:
        u = solve_spd(C, W - dirpen.offset)
        obj = 0.5 * float(u @ C @ u) - float(u @ W) + dirpen.value(u)
        kkt = kkt_residual(u, C @ u - W, dirpen, 1.0)
        return SolveReport(u, 0, obj, float(kkt), True)

    evals = np.linalg.eigvalsh(0.5 * (C + C.T))
    lo, hi = float(evals[0]), float(evals[-1])
    if lo <= 0:
        raise NotPositiveDefinite("C must be positive definite")
    step = 1.0 / hi
    kappa = np.sqrt(lo / hi)
    beta = (1.0 - kappa) / (1.0 + kappa)

    def smooth(u):
        g = C @ u - W
        return 0.5 * float(u @ (g - W)), g  # 0.5 u'Cu - u'W

    def prox_step(v, t):
        return dirpen.prox(v, t)

    ref = max(1.0, float(np.linalg.norm(W)))
    gm_tol = opts.tol * ref
    kkt_target = opts.tol * ref
    x = np.zeros(p)
    iters_total = 0
    converged = False
    while iters_total < opts.max_iter:
        budget = opts.max_iter - iters_total
        x, used, _, stalled, _ = _apg(
            x, smooth, prox_step, dirpen.value, opts, gm_tol, budget,
            fixed_step=step, momentum=beta,
        )
        iters_total += used
        kkt = kkt_residual(x, C @ x - W, dirpen, 1.0)
        if kkt <= kkt_target:
            converged = True
            break
        if stalled:
            break
        gm_tol *= 0.1
    kkt = kkt_residual(x, C @ x - W, dirpen, 1.0)
    obj = 0.5 * float(x @ C @ x) - float(x @ W) + dirpen.value(x)
    return SolveReport(x, iters_total, obj, float(kkt), converged)


def prox_two_step(theta1, pen: PenaltySpec, alpha: float, n: int) -> np.ndarray:
    """Refit-free second step: the prox of n^{-1/2} * alpha * penalty at theta1."""
    theta1 = np.asarray(theta1, dtype=float)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if n < 1:
        raise ValueError("n must be positive")
    if alpha == 0.0:
        return theta1.copy()
    return pen_prox(pen.with_scale(alpha), theta1, 1.0 / np.sqrt(n))
