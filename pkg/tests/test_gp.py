import numpy as np
import pytest
from scipy.stats import multivariate_normal, norm

from epinfer.gp import (
    FactorizationError,
    GpConditional,
    GpSpec,
    default_design,
    dense_covariance,
    gp_conditional,
    gp_conditional_dense,
    gp_log_density,
    gp_sample_conditional,
)


def random_spec(rng, T, p=2):
    X = default_design(T) if p == 2 else np.ones((T + 1, 1))
    mu = rng.normal(size=p) * 0.3
    return GpSpec(X, mu, float(rng.uniform(0.05, 2.0)), float(rng.uniform(0.1, 0.95)))


class TestLogDensity:
    def test_single_point(self, rng):
        spec = GpSpec(np.array([[1.0, 0.0]]), np.array([-1.3, 0.0]), 0.4, 0.8)
        x = -1.1
        expected = norm(loc=-1.3, scale=np.sqrt(0.4)).logpdf(x)
        assert gp_log_density(np.array([x]), spec) == pytest.approx(expected, rel=1e-12)

    def test_rho_to_zero_is_independent_normals(self, rng):
        T = 6
        spec = GpSpec(default_design(T), np.array([-1.3, 0.01]), 0.5, 1e-12)
        bt = spec.mean() + rng.normal(size=T + 1) * 0.3
        indep = float(np.sum(norm(loc=spec.mean(), scale=np.sqrt(0.5)).logpdf(bt)))
        assert gp_log_density(bt, spec) == pytest.approx(indep, abs=1e-6)

    def test_matches_dense_cholesky_oracle(self, rng):
        worst = 0.0
        for _ in range(40):
            T = int(rng.integers(1, 9))
            spec = random_spec(rng, T)
            bt = spec.mean() + rng.normal(size=T + 1)
            dense = multivariate_normal(mean=spec.mean(), cov=dense_covariance(spec)).logpdf(bt)
            worst = max(worst, abs(gp_log_density(bt, spec) - float(dense)))
        assert worst < 1e-8

    def test_shift_invariance_intercept_only(self, rng):
        # with an intercept-only mean the density depends only on index gaps
        T = 7
        spec_a = random_spec(rng, T, p=1)
        bt = spec_a.mean() + rng.normal(size=T + 1)
        spec_b = GpSpec(np.ones((T + 1, 1)), spec_a.mu, spec_a.sigma_beta2, spec_a.rho)
        assert gp_log_density(bt, spec_a) == gp_log_density(bt, spec_b)


class TestConditional:
    def test_centered_one_step(self):
        T = 4
        spec = GpSpec(default_design(T), np.array([-1.0, 0.02]), 0.3, 0.7)
        bt = spec.mean().copy()  # ends exactly at the mean
        cond = gp_conditional(bt, spec, default_design(0, t0=T + 1))
        m_next = np.array([1.0, T + 1.0]) @ spec.mu
        assert cond.mean[0] == pytest.approx(m_next, rel=1e-12)
        assert cond.covariance[0, 0] == pytest.approx(0.3 * (1 - 0.7**2), rel=1e-12)

    def test_geometric_decay_of_offset(self):
        T = 3
        spec = GpSpec(default_design(T), np.array([-1.0, 0.0]), 0.3, 0.8)
        bt = spec.mean().copy()
        bt[-1] += 1.0
        cond = gp_conditional(bt, spec, default_design(1, t0=T + 1))
        m2 = np.array([1.0, T + 2.0]) @ spec.mu
        assert cond.mean[1] == pytest.approx(m2 + 0.8**2, rel=1e-12)

    def test_matches_dense_matrix_oracle(self, rng):
        for _ in range(40):
            T = int(rng.integers(1, 7))
            T_star = int(rng.integers(1, 4))
            spec = random_spec(rng, T)
            bt = spec.mean() + rng.normal(size=T + 1)
            X_star = default_design(T_star - 1, t0=T + 1)
            a = gp_conditional(bt, spec, X_star)
            b = gp_conditional_dense(bt, spec, X_star)
            np.testing.assert_allclose(a.mean, b.mean, atol=1e-8)
            np.testing.assert_allclose(a.covariance, b.covariance, atol=1e-8)

    def test_conditional_variance_bounded_by_marginal(self, rng):
        for _ in range(20):
            T = int(rng.integers(1, 8))
            spec = random_spec(rng, T)
            bt = spec.mean() + rng.normal(size=T + 1)
            cond = gp_conditional(bt, spec, default_design(4, t0=T + 1))
            assert np.all(np.diag(cond.covariance) <= spec.sigma_beta2 + 1e-10)

    def test_bad_horizon(self, rng):
        spec = random_spec(rng, 3)
        with pytest.raises(ValueError):
            gp_conditional(spec.mean(), spec, default_design(1, t0=4), horizon=5)


class TestSampleConditional:
    def test_zero_covariance_returns_mean(self):
        cond = GpConditional(np.array([1.0, -2.0]), np.zeros((2, 2)))
        out = gp_sample_conditional(cond, np.random.default_rng(0))
        np.testing.assert_array_equal(out, cond.mean)

    def test_moments_match(self, rng):
        spec = GpSpec(default_design(5), np.array([-1.0, 0.05]), 0.6, 0.85)
        bt = spec.mean() + rng.normal(size=6)
        cond = gp_conditional(bt, spec, default_design(2, t0=6))
        g = np.random.default_rng(99)
        draws = np.array([gp_sample_conditional(cond, g) for _ in range(10000)])
        se = np.sqrt(np.diag(cond.covariance) / len(draws))
        assert np.all(np.abs(draws.mean(axis=0) - cond.mean) < 4 * se)
        emp_cov = np.cov(draws.T)
        rel = np.linalg.norm(emp_cov - cond.covariance) / np.linalg.norm(cond.covariance)
        assert rel < 0.10

    def test_non_psd_raises_after_perturbation(self):
        cov = np.array([[1.0, 0.0], [0.0, -0.5]])
        cond = GpConditional.__new__(GpConditional)  # bypass PSD validation
        object.__setattr__(cond, "mean", np.zeros(2))
        object.__setattr__(cond, "covariance", cov)
        with pytest.raises(FactorizationError):
            gp_sample_conditional(cond, np.random.default_rng(0))

    def test_psd_validation(self):
        with pytest.raises(ValueError):
            GpConditional(np.zeros(2), np.array([[1.0, 0.0], [0.0, -0.5]]))
        with pytest.raises(ValueError):
            GpConditional(np.zeros(2), np.array([[1.0, 0.4], [0.2, 1.0]]))
