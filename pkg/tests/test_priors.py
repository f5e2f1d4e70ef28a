import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import gammaincc

from epinfer.gp import GpSpec, default_design, gp_log_density
from epinfer.model import LinkFunction
from epinfer.priors import (
    PriorConfig,
    beta_logpdf,
    default_prior_config,
    gamma_logpdf,
    inv_gamma_logpdf,
    load_prior_config,
    log_prior,
    preset_by_name,
    save_prior_config,
    sensitivity_presets,
    trunc_gamma_logpdf,
    trunc_gamma_rvs,
)


class TestDefaults:
    def test_stated_prior_means(self):
        cfg = default_prior_config()
        assert cfg.i_u0_ratio_shape / cfg.i_u0_ratio_rate == pytest.approx(5.0)
        assert cfg.sigma_beta2_rate / (cfg.sigma_beta2_shape - 1) == pytest.approx(0.1)
        assert cfg.rho_a / (cfg.rho_a + cfg.rho_b) == pytest.approx(0.8)
        assert cfg.alpha_inv_shape / cfg.alpha_inv_rate == pytest.approx(9.3)
        np.testing.assert_allclose(cfg.mu_mean, [-1.31, 0.0])
        np.testing.assert_allclose(cfg.mu_cov, np.diag([0.09, 1.0]))
        np.testing.assert_allclose(cfg.eta_mean, [0.0])
        np.testing.assert_allclose(cfg.eta_cov, [[1.0]])
        assert cfg.sigma_gamma2_shape == cfg.sigma_gamma2_rate == 1.0
        assert cfg.link is LinkFunction.LOGIT

    def test_presets(self):
        default = default_prior_config()
        probit, cloglog, alpha_var, alpha_mean20 = sensitivity_presets()
        assert probit.link is LinkFunction.PROBIT
        assert cloglog.link is LinkFunction.CLOGLOG
        for preset in (probit, cloglog):
            assert preset.alpha_inv_shape == default.alpha_inv_shape
            assert preset.i_u0_ratio_shape == default.i_u0_ratio_shape
        # wider removal-period prior keeps the mean, grows the variance
        assert alpha_var.alpha_inv_shape / alpha_var.alpha_inv_rate == pytest.approx(9.3)
        var_wide = alpha_var.alpha_inv_shape / alpha_var.alpha_inv_rate**2
        var_default = default.alpha_inv_shape / default.alpha_inv_rate**2
        assert var_wide == pytest.approx(1.86)
        assert var_default == pytest.approx(0.2657, abs=5e-4)
        assert var_wide > var_default
        assert alpha_mean20.alpha_inv_shape / alpha_mean20.alpha_inv_rate == pytest.approx(20.0)

    def test_presets_by_name(self):
        assert preset_by_name("default").link is LinkFunction.LOGIT
        assert preset_by_name("probit").link is LinkFunction.PROBIT
        assert preset_by_name("cloglog").link is LinkFunction.CLOGLOG
        assert preset_by_name("alpha-var").alpha_inv_rate == 5.0
        assert preset_by_name("alpha-mean20").alpha_inv_shape == 700.0
        with pytest.raises(ValueError):
            preset_by_name("nope")


class TestDensities:
    def test_normalization_by_quadrature(self):
        checks = [
            (lambda x: np.exp(gamma_logpdf(x, 5.0, 1.0)), 0.0, np.inf),
            (lambda x: np.exp(inv_gamma_logpdf(x, 11.0, 1.0)), 0.0, np.inf),
            (lambda x: np.exp(beta_logpdf(x, 4.0, 1.0)), 0.0, 1.0),
            (lambda x: np.exp(trunc_gamma_logpdf(x, 325.5, 35.0)), 1.0, np.inf),
            (lambda x: np.exp(trunc_gamma_logpdf(x, 46.5, 5.0)), 1.0, np.inf),
        ]
        for fn, lo, hi in checks:
            total, _ = integrate.quad(fn, lo, hi, limit=200)
            assert total == pytest.approx(1.0, abs=1e-4)

    def test_truncated_gamma_versus_rejection_sampling(self):
        # truncation actually bites for this small shape
        shape, rate, lower = 2.0, 1.0, 1.0
        rng = np.random.default_rng(5)
        draws = np.array([trunc_gamma_rvs(shape, rate, rng, lower) for _ in range(20000)])
        assert np.all(draws >= lower)
        for a, b in ((1.0, 2.0), (2.0, 4.0), (4.0, np.inf)):
            mc = np.mean((draws >= a) & (draws < b))
            exact, _ = integrate.quad(
                lambda x: np.exp(trunc_gamma_logpdf(x, shape, rate, lower)), a, min(b, 60.0)
            )
            assert mc == pytest.approx(exact, abs=1e-2)

    def test_truncated_gamma_zero_below_support(self):
        assert trunc_gamma_logpdf(0.9, 325.5, 35.0) == -np.inf
        # above the cut the density is the gamma density over the tail mass
        x = 9.0
        expected = stats.gamma(a=325.5, scale=1 / 35.0).logpdf(x) - np.log(
            gammaincc(325.5, 35.0)
        )
        assert trunc_gamma_logpdf(x, 325.5, 35.0) == pytest.approx(expected, rel=1e-12)


class TestLogPrior:
    def setup_method(self):
        self.cfg = default_prior_config()
        self.T = 6
        self.X = default_design(self.T)
        self.theta = dict(
            r0=4.2,
            beta_tilde=np.linspace(-1.2, -1.5, self.T + 1),
            alpha_inv=9.0,
            mu=np.array([-1.25, -0.01]),
            sigma_beta2=0.12,
            rho=0.75,
            eta=np.array([-1.3]),
            sigma_gamma2=0.8,
        )

    def full(self, **overrides):
        kw = {**self.theta, **overrides}
        return log_prior(
            kw["r0"], kw["beta_tilde"], kw["alpha_inv"], kw["mu"], kw["sigma_beta2"],
            kw["rho"], kw["eta"], kw["sigma_gamma2"], self.cfg, self.X, 100.0,
        )

    def test_component_oracle(self):
        # independent scipy route for every block
        cfg, kw = self.cfg, self.theta
        expected = (
            stats.gamma(a=5.0, scale=1.0).logpdf(kw["r0"])
            - np.log(100.0)
            + stats.gamma(a=325.5, scale=1 / 35.0).logpdf(kw["alpha_inv"])
            - np.log(gammaincc(325.5, 35.0))
            + stats.multivariate_normal(mean=cfg.mu_mean, cov=cfg.mu_cov).logpdf(kw["mu"])
            + stats.invgamma(a=11.0, scale=1.0).logpdf(kw["sigma_beta2"])
            + stats.beta(4.0, 1.0).logpdf(kw["rho"])
            + stats.norm(0.0, 1.0).logpdf(kw["eta"][0])
            + stats.invgamma(a=1.0, scale=1.0).logpdf(kw["sigma_gamma2"])
            + gp_log_density(
                kw["beta_tilde"],
                GpSpec(self.X, kw["mu"], kw["sigma_beta2"], kw["rho"]),
            )
        )
        assert self.full() == pytest.approx(float(expected), abs=1e-10)

    def test_out_of_support(self):
        assert self.full(rho=1.2) == -np.inf
        assert self.full(alpha_inv=0.9) == -np.inf
        assert self.full(sigma_beta2=-1.0) == -np.inf
        assert self.full(r0=-0.1) == -np.inf

    def test_finite_on_plausible_hypercube(self):
        for r0 in (1.0, 5.0, 12.0):
            for alpha_inv in (5.0, 9.3, 14.0):
                for rho in (0.3, 0.8, 0.97):
                    assert np.isfinite(self.full(r0=r0, alpha_inv=alpha_inv, rho=rho))


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        cfg = preset_by_name("alpha-var")
        path = tmp_path / "prior.cfg"
        save_prior_config(cfg, path)
        loaded = load_prior_config(path)
        assert loaded.alpha_inv_shape == cfg.alpha_inv_shape
        assert loaded.alpha_inv_rate == cfg.alpha_inv_rate
        assert loaded.link is cfg.link
        np.testing.assert_array_equal(loaded.mu_cov, cfg.mu_cov)
        np.testing.assert_array_equal(loaded.eta_mean, cfg.eta_mean)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("bogus_key = 1\n")
        with pytest.raises(ValueError):
            load_prior_config(path)

    def test_validation(self):
        with pytest.raises(ValueError):
            PriorConfig(rho_a=-1.0)
        with pytest.raises(ValueError):
            PriorConfig(mu_cov=np.array([[1.0, 2.0], [2.0, 1.0]]))  # not PD
