"""Design covariance assembly, scenario validation, dataset generation, and
the curated benchmark factories."""

import numpy as np
import pytest

from polypen import (
    DesignSpec,
    LossSpec,
    NoiseSpec,
    RngStream,
    ScenarioSpec,
    gen_dataset,
)
from polypen.datagen import (
    build_covariance,
    normal_quantile,
    paper_penalty,
    paper_scenario,
)
from polypen.errors import InvalidScenario

# frozen quantiles, computed before the build from an independent erfc
# bisection at 1e-15 accuracy
Q_2713 = 2.7130518884727213  # upper 0.2/60 tail
Q_128 = 1.2815515655446004  # upper 0.1 tail


class TestBuildCovariance:
    def test_identity(self):
        np.testing.assert_array_equal(build_covariance(DesignSpec.identity(4)), np.eye(4))

    def test_zero_rho_blocks_are_identity(self):
        spec = DesignSpec.compound_symmetry_blocks(block_size=3, rho=0.0, blocks=2)
        np.testing.assert_array_equal(build_covariance(spec), np.eye(6))

    def test_block_structure_exact(self):
        spec = DesignSpec.compound_symmetry_blocks(block_size=2, rho=0.5, blocks=2)
        want = np.array(
            [
                [1.0, 0.5, 0.0, 0.0],
                [0.5, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.5],
                [0.0, 0.0, 0.5, 1.0],
            ]
        )
        np.testing.assert_array_equal(build_covariance(spec), want)

    def test_block_eigenvalues(self):
        spec = DesignSpec.compound_symmetry_blocks(block_size=2, rho=0.5, blocks=1)
        evals = np.linalg.eigvalsh(build_covariance(spec))
        np.testing.assert_allclose(evals, [0.5, 1.5])

    def test_thirty_dim_kronecker(self):
        spec = DesignSpec.compound_symmetry_blocks(block_size=5, rho=0.8, blocks=6)
        block = 0.2 * np.eye(5) + 0.8 * np.ones((5, 5))
        want = np.kron(np.eye(6), block)
        np.testing.assert_array_equal(build_covariance(spec), want)

    def test_explicit_matrix_passthrough(self):
        M = np.array([[2.0, 0.3], [0.3, 1.0]])
        np.testing.assert_array_equal(build_covariance(DesignSpec.explicit(M)), M)

    def test_rho_bounds(self):
        from polypen.errors import NotPositiveDefinite

        # block PD needs -1/(b-1) < rho < 1
        DesignSpec.compound_symmetry_blocks(block_size=3, rho=-0.49, blocks=1)
        with pytest.raises(NotPositiveDefinite):
            DesignSpec.compound_symmetry_blocks(block_size=3, rho=-0.5, blocks=1)
        with pytest.raises(NotPositiveDefinite):
            DesignSpec.compound_symmetry_blocks(block_size=3, rho=1.0, blocks=1)

    def test_explicit_rejects_indefinite(self):
        with pytest.raises(Exception):
            DesignSpec.explicit(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_sampler_covariance(self):
        spec = DesignSpec.compound_symmetry_blocks(block_size=2, rho=0.6, blocks=1)
        rows = spec.sampler()(100_000, RngStream(15).generator())
        emp = rows.T @ rows / 100_000
        want = build_covariance(spec)
        assert np.abs(emp - want).max() <= 0.05 * np.abs(want).max()


class TestScenarioValidation:
    def test_additive_losses_need_noise(self):
        design = DesignSpec.identity(2)
        theta0 = np.array([1.0, 0.0])
        for loss in (LossSpec.squared(), LossSpec.huber(1.0), LossSpec.quantile(0.5)):
            with pytest.raises(InvalidScenario):
                ScenarioSpec(design=design, theta0=theta0, loss=loss, noise=None, n=50)

    def test_glm_must_not_have_noise(self):
        design = DesignSpec.identity(2)
        theta0 = np.array([1.0, 0.0])
        for loss in (LossSpec.logistic(), LossSpec.poisson()):
            with pytest.raises(InvalidScenario):
                ScenarioSpec(
                    design=design, theta0=theta0, loss=loss,
                    noise=NoiseSpec.gaussian(1.0), n=50,
                )

    def test_squared_needs_finite_variance(self):
        design = DesignSpec.identity(2)
        with pytest.raises(InvalidScenario):
            ScenarioSpec(
                design=design, theta0=np.zeros(2), loss=LossSpec.squared(),
                noise=NoiseSpec.student_t(2.0), n=50,
            )
        # heavy tails are fine for the quantile loss
        ScenarioSpec(
            design=design, theta0=np.zeros(2), loss=LossSpec.quantile(0.5),
            noise=NoiseSpec.student_t(1.0), n=50,
        )

    def test_dimension_check(self):
        with pytest.raises(Exception):
            ScenarioSpec(
                design=DesignSpec.identity(3), theta0=np.zeros(2),
                loss=LossSpec.logistic(), noise=None, n=50,
            )

    def test_effective_noise_recenters_quantile(self):
        spec = ScenarioSpec(
            design=DesignSpec.identity(2), theta0=np.zeros(2),
            loss=LossSpec.quantile(0.25), noise=NoiseSpec.laplace(1.0), n=50,
        )
        eff = spec.effective_noise()
        assert eff.cdf(0.0) == pytest.approx(0.25, abs=1e-9)
        # non-quantile losses keep the stated law
        spec2 = ScenarioSpec(
            design=DesignSpec.identity(2), theta0=np.zeros(2),
            loss=LossSpec.squared(), noise=NoiseSpec.gaussian(2.0), n=50,
        )
        assert spec2.effective_noise() == spec2.noise


class TestGenDataset:
    def test_deterministic(self):
        spec = paper_scenario(n=100)
        a = gen_dataset(spec, RngStream(7))
        b = gen_dataset(spec, RngStream(7))
        np.testing.assert_array_equal(a.design, b.design)
        np.testing.assert_array_equal(a.response, b.response)

    def test_zero_noise_squared_is_exact(self, gen):
        design = DesignSpec.identity(3)
        theta0 = np.array([1.0, -2.0, 0.5])
        spec = ScenarioSpec(
            design=design, theta0=theta0, loss=LossSpec.squared(),
            noise=NoiseSpec.gaussian(0.0), n=40,
        )
        data = gen_dataset(spec, RngStream(3))
        np.testing.assert_array_equal(data.response, data.design @ theta0)

    def test_logistic_balanced_at_zero_target(self):
        spec = ScenarioSpec(
            design=DesignSpec.identity(2), theta0=np.zeros(2),
            loss=LossSpec.logistic(), noise=None, n=10_000,
        )
        data = gen_dataset(spec, RngStream(5))
        assert set(np.unique(data.response)) <= {0.0, 1.0}
        # mean response 1/2 within 3 binomial sigmas
        assert abs(data.response.mean() - 0.5) <= 3 * 0.5 / np.sqrt(10_000)

    def test_poisson_unit_mean_at_zero_target(self):
        spec = ScenarioSpec(
            design=DesignSpec.identity(2), theta0=np.zeros(2),
            loss=LossSpec.poisson(), noise=None, n=10_000,
        )
        data = gen_dataset(spec, RngStream(6))
        assert np.all(data.response >= 0)
        np.testing.assert_array_equal(data.response, np.round(data.response))
        assert abs(data.response.mean() - 1.0) <= 3 / np.sqrt(10_000)

    def test_quantile_uses_recentered_noise(self):
        # responses must place the alpha-quantile of the residual at zero
        spec = ScenarioSpec(
            design=DesignSpec.identity(1), theta0=np.zeros(1),
            loss=LossSpec.quantile(0.2), noise=NoiseSpec.laplace(1.0), n=50_000,
        )
        data = gen_dataset(spec, RngStream(9))
        frac = np.mean(data.response <= 0.0)
        assert frac == pytest.approx(0.2, abs=0.01)


class TestNormalQuantile:
    def test_matches_reference_grid(self):
        from scipy.special import ndtri

        qs = np.concatenate([
            np.array([1e-12, 1e-8, 1e-4]),
            np.linspace(0.01, 0.99, 197),
            1.0 - np.array([1e-4, 1e-8, 1e-12]),
        ])
        got = normal_quantile(qs)
        np.testing.assert_allclose(got, ndtri(qs), atol=1e-12, rtol=0)

    def test_scalar_in_scalar_out(self):
        out = normal_quantile(0.5)
        assert isinstance(out, float)
        assert out == pytest.approx(0.0, abs=1e-15)

    def test_symmetry(self):
        q = np.linspace(0.001, 0.499, 50)
        np.testing.assert_allclose(normal_quantile(q), -normal_quantile(1 - q), atol=1e-13)

    def test_domain_errors(self):
        for bad in (0.0, 1.0, -0.1, 1.1, np.nan):
            with pytest.raises(ValueError):
                normal_quantile(bad)

    def test_frozen_values(self):
        assert normal_quantile(1.0 - 0.2 / 60.0) == pytest.approx(Q_2713, abs=1e-12)
        assert normal_quantile(0.9) == pytest.approx(Q_128, abs=1e-12)


class TestBenchmarkFactories:
    def test_scenario_shape(self):
        spec = paper_scenario(n=750)
        assert spec.n == 750
        assert spec.p == 30
        assert spec.loss.variant == "logistic"
        assert spec.noise is None
        want = np.concatenate([np.full(5, -2.0), np.ones(5), np.zeros(20)])
        np.testing.assert_array_equal(spec.theta0, want)
        cov = build_covariance(spec.design)
        assert cov[0, 4] == 0.8 and cov[0, 5] == 0.0 and cov[0, 0] == 1.0

    def test_penalty_weights(self):
        pen = paper_penalty()
        assert pen.variant == "slope"
        lam = np.asarray(pen.lam_seq)
        assert lam.shape == (30,)
        assert np.all(np.diff(lam) < 0)
        assert np.all(lam > 0)
        assert lam[0] == pytest.approx(Q_2713, abs=1e-12)
        assert lam[-1] == pytest.approx(Q_128, abs=1e-12)
        assert pen.scale == 1.0
