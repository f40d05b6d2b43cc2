"""Limit law sampling, pattern distributions, recovery formulas, and the
irrepresentability certificate."""

import numpy as np
import pytest

from polypen import (
    LimitLaw,
    MomentPair,
    PenaltySpec,
    RngStream,
    alpha_sweep_recovery,
    irrepresentability_check,
    limit_pattern_distribution,
    recovery_gaussian,
    recovery_probability_formula,
    sample_limit,
)
from polypen.asymptotics import PatternDistribution
from polypen.errors import InvalidScenario
from polypen.penalty import limit_pattern, pattern

PHI_AT_1 = 0.8413447460685429  # standard normal cdf at 1, frozen beforehand


def law_of(pen, theta0, C, C_delta=None):
    mom = MomentPair(C=np.asarray(C, float), C_delta=np.asarray(C_delta if C_delta is not None else C, float))
    return LimitLaw(theta0=np.asarray(theta0, float), moments=mom, penalty=pen)


def cs_matrix(p, rho):
    return (1.0 - rho) * np.eye(p) + rho * np.ones((p, p))


class TestSampleLimit:
    def test_no_penalty_is_linear_in_w(self):
        # u = C^{-1} W draw by draw; covariance check lives in the acceptance run
        C = np.array([[2.0, 0.3], [0.3, 1.0]])
        law = law_of(PenaltySpec.none(), np.zeros(2), C, np.eye(2))
        rng = RngStream(4)
        u = sample_limit(law, rng)
        w = rng.generator().multivariate_normal(np.zeros(2), np.eye(2))
        # same stream, same draw; the solve is the only transformation
        np.testing.assert_allclose(u, np.linalg.solve(C, w), atol=1e-8)

    def test_deterministic_in_stream(self):
        law = law_of(PenaltySpec.lasso(0.8), np.array([1.0, 0.0]), np.eye(2))
        a = sample_limit(law, RngStream(9))
        b = sample_limit(law, RngStream(9))
        np.testing.assert_array_equal(a, b)

    def test_scale_zero_matches_none(self):
        C = cs_matrix(3, 0.4)
        law0 = law_of(PenaltySpec.lasso(2.0, scale=0.0), np.zeros(3), C)
        law1 = law_of(PenaltySpec.none(), np.zeros(3), C)
        np.testing.assert_allclose(
            sample_limit(law0, RngStream(2)), sample_limit(law1, RngStream(2)), atol=1e-8
        )


class TestPatternDistribution:
    def test_identity_lasso_masses(self):
        # coordinates decouple at C = C_delta = I: each is soft-threshold of a
        # standard normal, so P(coordinate = 0) = 2*Phi(lam) - 1
        lam = 1.0
        law = law_of(PenaltySpec.lasso(lam), np.zeros(2), np.eye(2))
        dist = limit_pattern_distribution(law, 4000, RngStream(1))
        zero2 = [pat for pat in dist.support if pat.signs[1] == 0]
        mass = sum(dist.probability(pat) for pat in zero2)
        want = 2.0 * PHI_AT_1 - 1.0
        se = np.sqrt(want * (1.0 - want) / 4000)
        assert abs(mass - want) <= 3.5 * se

    def test_probabilities_sum_to_one(self):
        law = law_of(PenaltySpec.slope((1.2, 0.7)), np.array([1.0, 0.0]), cs_matrix(2, 0.3))
        dist = limit_pattern_distribution(law, 2000, RngStream(6))
        total = sum(dist.probability(pat) for pat in dist.support)
        assert total == pytest.approx(1.0)
        assert dist.draws == 2000
        assert dist.failures == 0

    def test_rows_are_sorted_by_mass(self):
        law = law_of(PenaltySpec.lasso(0.6), np.array([1.0, 0.0]), np.eye(2))
        dist = limit_pattern_distribution(law, 1500, RngStream(3))
        masses = [m for _, m, _, _ in dist.rows()]
        assert masses == sorted(masses, reverse=True)

    def test_se_is_binomial(self):
        law = law_of(PenaltySpec.lasso(0.6), np.zeros(2), np.eye(2))
        dist = limit_pattern_distribution(law, 1000, RngStream(5))
        pat = dist.support[0]
        prob = dist.probability(pat)
        assert dist.se(pat) == pytest.approx(np.sqrt(prob * (1 - prob) / 1000))

    def test_unseen_pattern_has_zero_mass(self):
        from polypen.penalty import Pattern

        law = law_of(PenaltySpec.lasso(5.0), np.zeros(2), np.eye(2))
        dist = limit_pattern_distribution(law, 500, RngStream(8))
        rare = Pattern(variant="lasso", signs=(1, 1), ranks=None, diff_signs=None, dim=2)
        assert dist.probability(rare) == 0.0

    def test_draws_extend_consistently(self):
        # per-draw child streams: the first draws of a longer run reproduce a
        # shorter run exactly
        law = law_of(PenaltySpec.lasso(1.0), np.array([1.0, 0.0]), cs_matrix(2, 0.5))
        short = limit_pattern_distribution(law, 300, RngStream(12))
        long = limit_pattern_distribution(law, 600, RngStream(12))
        for pat in short.support:
            n_short = round(short.probability(pat) * 300)
            n_long = round(long.probability(pat) * 600)
            assert n_long >= n_short  # counts can only accumulate

    def test_bookkeeping_validation(self):
        with pytest.raises(Exception):
            PatternDistribution(cells={}, draws=0, successes=0, failures=0, stream=(0,))


class TestRecoveryGaussian:
    def test_zero_target_reduces_to_noise_law(self):
        C = cs_matrix(3, 0.4)
        Cd = 0.5 * C
        law = law_of(PenaltySpec.lasso(1.0), np.zeros(3), C, Cd)
        mu, Sigma = recovery_gaussian(law)
        np.testing.assert_allclose(mu, np.zeros(3), atol=1e-12)
        np.testing.assert_allclose(Sigma, Cd, atol=1e-12)

    def test_full_support_is_deterministic_point(self):
        pen = PenaltySpec.lasso(0.7)
        theta0 = np.array([2.0, -1.0])
        law = law_of(pen, theta0, cs_matrix(2, 0.3))
        mu, Sigma = recovery_gaussian(law)
        np.testing.assert_allclose(Sigma, np.zeros((2, 2)), atol=1e-12)
        np.testing.assert_allclose(mu, 0.7 * np.sign(theta0), atol=1e-12)

    def test_basis_choice_does_not_matter(self, gen):
        pen = PenaltySpec.lasso(1.0)
        theta0 = np.array([1.5, 0.0, 0.0])
        law = law_of(pen, theta0, cs_matrix(3, 0.25))
        mu0, Sigma0 = recovery_gaussian(law)
        # any independent spanning set of the pattern subspace works
        # (columns of a p-row matrix, here a rescaled canonical vector)
        basis = np.array([[2.0], [0.0], [0.0]])
        mu1, Sigma1 = recovery_gaussian(law, basis=basis)
        np.testing.assert_allclose(mu0, mu1, atol=1e-10)
        np.testing.assert_allclose(Sigma0, Sigma1, atol=1e-10)


class TestRecoveryFormula:
    def test_full_support_certain(self):
        law = law_of(PenaltySpec.lasso(0.5), np.array([1.0, -1.0]), np.eye(2))
        got = recovery_probability_formula(law, 2000, RngStream(7))
        assert got.probability == pytest.approx(1.0)
        assert got.se == 0.0

    def test_agrees_with_direct_mass(self):
        # the acceptance run covers the pinned scenario at scale; this is a
        # fast smoke version on a small lasso instance
        pen = PenaltySpec.lasso(1.0)
        theta0 = np.array([1.0, 0.0])
        law = law_of(pen, theta0, cs_matrix(2, 0.4))
        formula = recovery_probability_formula(law, 8000, RngStream(21))
        direct = limit_pattern_distribution(law, 8000, RngStream(22))
        want = pattern(pen, theta0)
        diff = abs(formula.probability - direct.probability(want))
        combined = np.hypot(formula.se, direct.se(want))
        assert diff <= 3.0 * combined

    def test_rejects_dimension_mismatch(self):
        law = law_of(PenaltySpec.lasso(1.0), np.zeros(2), np.eye(2))
        assert law.p == 2


class TestAlphaSweep:
    def test_zero_alpha_no_thresholding(self):
        # without penalty mass the sign pattern of theta0 = (1, 0) requires
        # an exact zero in a continuous law: probability 0
        pen = PenaltySpec.lasso(1.0)
        law = law_of(pen, np.array([1.0, 0.0]), np.eye(2))
        pts = alpha_sweep_recovery(law, [0.0, 4.0], 1500, RngStream(13))
        assert pts[0].alpha == 0.0
        assert pts[0].probability == pytest.approx(0.0, abs=1e-3)
        assert pts[1].probability > 0.6

    def test_points_deterministic_per_grid_slot(self):
        pen = PenaltySpec.lasso(1.0)
        law = law_of(pen, np.array([1.0, 0.0]), np.eye(2))
        a = alpha_sweep_recovery(law, [0.5, 1.0], 800, RngStream(3))
        b = alpha_sweep_recovery(law, [0.5, 1.0, 2.0], 800, RngStream(3))
        assert a[0].probability == b[0].probability
        assert a[1].probability == b[1].probability

    def test_large_alpha_saturates_on_good_instance(self):
        pen = PenaltySpec.lasso(1.0)
        theta0 = np.array([1.0, -2.0, 0.0, 0.0])
        law = law_of(pen, theta0, cs_matrix(4, 0.2))
        assert irrepresentability_check(law)
        pts = alpha_sweep_recovery(law, [6.0], 1500, RngStream(17))
        assert pts[0].probability >= 0.95

    def test_decay_is_gaussian_in_alpha(self):
        # on an instance with the origin in the interior of the limit
        # subdifferential face, failure mass decays like exp(-c alpha^2)
        pen = PenaltySpec.lasso(1.0)
        theta0 = np.array([1.0, 0.0])
        law = law_of(pen, theta0, np.eye(2))
        alphas = [1.5, 2.0, 2.5]
        pts = alpha_sweep_recovery(law, alphas, 20_000, RngStream(30))
        fails = np.array([1.0 - q.probability for q in pts])
        assert np.all(fails > 0)
        slopes = np.diff(np.log(fails)) / np.diff(np.square(alphas))
        assert np.all(slopes < 0)


class TestIrrepresentability:
    def test_full_support_trivially_holds(self):
        law = law_of(PenaltySpec.lasso(1.0), np.array([1.0, -1.0]), cs_matrix(2, 0.6))
        res = irrepresentability_check(law)
        assert res.holds
        assert res.margin == np.inf

    def test_identity_design_holds(self):
        law = law_of(PenaltySpec.lasso(1.0), np.array([1.0, 0.0, 0.0]), np.eye(3))
        assert irrepresentability_check(law)

    def test_classical_lasso_margin(self):
        # one active coordinate, equicorrelated design: the inactive-block
        # condition reads |rho| < 1 with margin lam * (1 - |rho|) per unit scale
        for rho in (0.0, 0.3, 0.6):
            C = cs_matrix(2, rho)
            law = law_of(PenaltySpec.lasso(1.0), np.array([1.0, 0.0]), C)
            res = irrepresentability_check(law)
            assert res.holds
            assert res.margin == pytest.approx(1.0 - rho, abs=1e-7)

    def test_correlated_inactive_coordinate_fails(self):
        # actives orthogonal, inactive leaning on both: the transferred signs
        # add, so the condition reads rho13 + rho23 < 1
        def three_site(r):
            return np.array([[1.0, 0.0, r], [0.0, 1.0, r], [r, r, 1.0]])

        theta0 = np.array([1.0, 1.0, 0.0])
        ok = irrepresentability_check(law_of(PenaltySpec.lasso(1.0), theta0, three_site(0.4)))
        bad = irrepresentability_check(law_of(PenaltySpec.lasso(1.0), theta0, three_site(0.6)))
        assert bool(ok) is True
        assert ok.margin == pytest.approx(1.0 - 0.8, abs=1e-7)
        assert bool(bad) is False

    def test_margin_matches_direct_formula(self):
        # p = 3, two same-sign active coordinates: margin = lam*(1 - 2 rho/(1+rho))
        rho = 0.3
        C = cs_matrix(3, rho)
        law = law_of(PenaltySpec.lasso(1.0), np.array([1.0, 1.0, 0.0]), C)
        res = irrepresentability_check(law)
        want = 1.0 - 2.0 * rho / (1.0 + rho)
        assert res.margin == pytest.approx(want, abs=1e-7)

    def test_saturation_follows_the_certificate(self):
        # where the certificate fails, large penalty scales push the inactive
        # coordinate off zero deterministically, so recovery collapses
        C = np.array([[1.0, 0.0, 0.6], [0.0, 1.0, 0.6], [0.6, 0.6, 1.0]])
        pen = PenaltySpec.lasso(1.0)
        theta0 = np.array([1.0, 1.0, 0.0])
        law = law_of(pen, theta0, C)
        assert not irrepresentability_check(law)
        pts = alpha_sweep_recovery(law, [8.0], 2000, RngStream(41))
        assert pts[0].probability < 0.5


class TestLimitLawValidation:
    def test_dimension_checks(self):
        from polypen.errors import NotPositiveDefinite

        with pytest.raises(Exception):
            law_of(PenaltySpec.lasso(1.0), np.zeros(3), np.eye(2))
        # C_delta may be singular (degenerate noise), but not indefinite;
        # the rejection surfaces at sampling time
        law = LimitLaw(
            theta0=np.zeros(2),
            moments=MomentPair(C=np.eye(2), C_delta=-np.eye(2)),
            penalty=PenaltySpec.none(),
        )
        with pytest.raises(NotPositiveDefinite):
            sample_limit(law, RngStream(0))

    def test_with_scale(self):
        law = law_of(PenaltySpec.lasso(1.0), np.zeros(2), np.eye(2))
        law2 = law.with_scale(0.25)
        assert law2.penalty.scale == 0.25
        assert law.penalty.scale == 1.0

    def test_true_pattern_uses_theta0(self):
        pen = PenaltySpec.lasso(1.0)
        theta0 = np.array([2.0, 0.0])
        law = law_of(pen, theta0, np.eye(2))
        assert law.true_pattern == pattern(pen, theta0)

    def test_limit_pattern_consistency(self, gen):
        # distribution cells are limit patterns of theta0 along sampled u
        pen = PenaltySpec.lasso(0.8)
        theta0 = np.array([1.0, 0.0])
        law = law_of(pen, theta0, np.eye(2))
        rng = RngStream(19)
        dist = limit_pattern_distribution(law, 200, rng)
        for i in range(200):
            u = sample_limit(law, rng.child(i))
            pat = limit_pattern(pen, theta0, u)
            assert dist.probability(pat) > 0
