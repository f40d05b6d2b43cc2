"""Shared test oracles.

cvxpy lives here and only here: the package itself must not depend on it.
The QP/LP oracles below re-state each penalty from its definition (sorted-L1
as a max of linear functionals, fused lasso as an explicit sum of absolute
differences) so agreement is evidence, not circularity.
"""

import itertools

import cvxpy as cp
import numpy as np
import pytest

from polypen import PenaltySpec


def slope_value_cvx(x, lam):
    """Sorted-L1 via the telescoping sum_largest identity (lam nonincreasing)."""
    lam = np.asarray(lam, dtype=float)
    expr = 0
    for k in range(1, lam.size + 1):
        step = lam[k - 1] - (lam[k] if k < lam.size else 0.0)
        if step != 0.0:
            expr = expr + step * cp.sum_largest(cp.abs(x), k)
    return expr


def penalty_value_cvx(pen: PenaltySpec, x):
    """cvxpy expression for value(pen, x), built from the definitions."""
    a = pen.scale
    if pen.variant == "none":
        return 0 * cp.sum(x)
    if pen.variant == "lasso":
        return a * pen.lam * cp.norm1(x)
    if pen.variant == "weighted_lasso":
        return a * cp.sum(cp.multiply(np.asarray(pen.weights), cp.abs(x)))
    if pen.variant == "slope":
        return a * slope_value_cvx(x, pen.lam_seq)
    if pen.variant == "fused_lasso":
        expr = pen.lam1 * cp.norm1(x)
        if x.shape[0] > 1:
            expr = expr + pen.lam2 * cp.norm1(cp.diff(x))
        return a * expr
    if pen.variant == "elastic_net":
        return a * (pen.lam1 * cp.norm1(x) + pen.lam2 * cp.sum_squares(x))
    raise ValueError(pen.variant)


_CLARABEL_TIGHT = dict(
    tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12,
    tol_infeas_abs=1e-12, tol_infeas_rel=1e-12,
)


def prox_qp(pen: PenaltySpec, v, t):
    """Brute-force prox via cvxpy; the package result must match."""
    v = np.asarray(v, dtype=float)
    x = cp.Variable(v.size)
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(x - v) + t * penalty_value_cvx(pen, x)))
    prob.solve(solver=cp.CLARABEL, **_CLARABEL_TIGHT)
    assert prob.status == cp.OPTIMAL, prob.status
    return np.asarray(x.value, dtype=float)


def slope_vertices(lam):
    """All vertices of the sorted-L1 subdifferential: signed permutations of lam.

    Exponential in p -- test-only, p <= 3.
    """
    lam = np.asarray(lam, dtype=float)
    p = lam.size
    verts = set()
    for perm in itertools.permutations(range(p)):
        for signs in itertools.product((-1.0, 1.0), repeat=p):
            v = tuple(signs[i] * lam[perm[i]] for i in range(p))
            verts.add(v)
    return np.array(sorted(verts))


def in_hull(point, vertices, tol=1e-9):
    """LP feasibility: point in conv(vertices)?"""
    m = vertices.shape[0]
    w = cp.Variable(m, nonneg=True)
    prob = cp.Problem(
        cp.Minimize(0),
        [vertices.T @ w == point, cp.sum(w) == 1],
    )
    prob.solve(solver=cp.CLARABEL)
    if prob.status != cp.OPTIMAL:
        return False
    resid = np.abs(vertices.T @ w.value - point).max()
    return resid <= tol


def subdiff_contains_vertex_oracle(theta, lam, v, tol=1e-9):
    """Sorted-L1 subdifferential membership by definition: v in conv(active
    vertices), active = argmax over all signed permutations of <vertex, theta>."""
    verts = slope_vertices(lam)
    scores = verts @ np.asarray(theta, dtype=float)
    best = scores.max()
    active = verts[scores >= best - 1e-12]
    return in_hull(np.asarray(v, dtype=float), active, tol=tol)


def grid_polish_min(objective, p, radius=4.0, coarse=41, rounds=6):
    """Derivative-free oracle minimizer: coarse grid then shrinking local grids."""
    center = np.zeros(p)
    span = radius
    best_x, best_v = None, np.inf
    for _ in range(rounds):
        axes = [np.linspace(c - span, c + span, coarse) for c in center]
        for point in itertools.product(*axes):
            x = np.array(point)
            val = objective(x)
            if val < best_v:
                best_v, best_x = val, x
        center = best_x
        span = span * 2.5 / (coarse - 1) * 2  # keep neighbors of the best cell
    return best_x, best_v


@pytest.fixture
def gen():
    return np.random.default_rng(20240816)
