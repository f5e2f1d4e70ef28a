import numpy as np
import pytest

from epinfer.dataio import ScenarioSpec, generate_scenario
from epinfer.forecasting import forecast, forecast_table, train_test_split
from epinfer.model import LinkFunction, link_forward
from epinfer.priors import default_prior_config
from epinfer.sampler import ParameterState, PosteriorDraws


def _single_draw(obs, truth, sigma_beta2=1e-20, sigma_gamma2=1e-20, beta_scale=1.0):
    gamma_tilde = link_forward(truth.gamma, LinkFunction.LOGIT)
    state = ParameterState(
        r0=truth.params.I_U0 / obs.I_D0,
        beta_tilde=np.log(truth.params.beta * beta_scale),
        alpha_inv=1.0 / truth.params.alpha,
        mu=np.array([float(np.mean(np.log(truth.params.beta * beta_scale))), 0.0]),
        sigma_beta2=sigma_beta2,
        rho=0.8,
        eta=np.array([float(np.mean(gamma_tilde))]),
        sigma_gamma2=sigma_gamma2,
    )
    return PosteriorDraws(
        r0=np.array([state.r0]),
        beta_tilde=state.beta_tilde[None, :],
        alpha_inv=np.array([state.alpha_inv]),
        mu=state.mu[None, :],
        sigma_beta2=np.array([state.sigma_beta2]),
        rho=np.array([state.rho]),
        eta=state.eta[None, :],
        sigma_gamma2=np.array([state.sigma_gamma2]),
        accept_rates={},
        swap_accept_rates=np.array([]),
    )


@pytest.fixture(scope="module")
def scn1_small():
    return generate_scenario(ScenarioSpec(id="scn1", T=39, seed=5))


class TestTrainTestSplit:
    def test_twenty_day_training_window(self, scn1_small):
        obs, _ = scn1_small
        train, test = train_test_split(obs, 19)
        assert len(train.B) == 20
        assert len(test.B) == obs.T - 19
        assert train.I_D0 == obs.I_D0
        assert test.day0_date == obs.date(20)

    def test_boundary_single_test_day(self, scn1_small):
        obs, _ = scn1_small
        train, test = train_test_split(obs, obs.T - 1)
        assert len(test.B) == 1

    def test_partition_property(self, scn1_small):
        obs, _ = scn1_small
        train, test = train_test_split(obs, 11)
        np.testing.assert_array_equal(np.concatenate([train.B, test.B]), obs.B)

    @pytest.mark.parametrize("bad", [0, -3, 39, 100])
    def test_out_of_range(self, scn1_small, bad):
        obs, _ = scn1_small
        with pytest.raises(IndexError):
            train_test_split(obs, bad)


class TestForecast:
    def test_zero_noise_limit_is_deterministic(self, scn1_small):
        obs, truth = scn1_small
        draws = _single_draw(obs, truth)
        cfg = default_prior_config()
        a = forecast(draws, obs, cfg, horizon=5, seed=1)
        b = forecast(draws, obs, cfg, horizon=5, seed=999)
        np.testing.assert_allclose(a.B_star, b.B_star, atol=1e-9)
        np.testing.assert_allclose(a.Re_star, b.Re_star, atol=1e-9)

    def test_seeded_determinism(self, scn1_small):
        obs, _ = scn1_small
        draws = _single_draw(*scn1_small, sigma_beta2=0.05, sigma_gamma2=0.05)
        cfg = default_prior_config()
        a = forecast(draws, obs, cfg, horizon=8, seed=42)
        b = forecast(draws, obs, cfg, horizon=8, seed=42)
        np.testing.assert_array_equal(a.B_star, b.B_star)
        np.testing.assert_array_equal(a.Re_star, b.Re_star)

    def test_declining_epidemic_gives_non_increasing_median(self):
        # contained epidemic: R0 = 0.4 throughout, so the truth has Re < 0.5
        import datetime

        from epinfer.model import Observations, Population

        N, alpha, T = 1e6, 1 / 9.3, 30
        IU0, ID0, gamma0 = 5000.0, 300.0, 0.2
        beta = np.full(T + 1, 0.4 * alpha)
        S, IU, ID, R = N - IU0 - ID0, IU0, ID0, 0.0
        B = np.empty(T + 1)
        for t in range(T + 1):
            B[t] = gamma0 * (1 - alpha) * IU
            if t < T:
                ninf = beta[t] * S * (IU + ID) / N
                S, IU, ID, R = S - ninf, (1 - alpha) * IU + ninf - B[t], (1 - alpha) * ID + B[t], R + alpha * (IU + ID)
        obs = Observations(B, ID0, Population(N), datetime.date(2020, 3, 1))
        state = ParameterState(
            r0=IU0 / ID0,
            beta_tilde=np.log(beta),
            alpha_inv=9.3,
            mu=np.array([float(np.log(0.4 * alpha)), 0.0]),
            sigma_beta2=1e-12,
            rho=0.8,
            eta=np.array([float(link_forward(gamma0, LinkFunction.LOGIT))]),
            sigma_gamma2=1e-4,
        )
        n_rep = 300
        draws = PosteriorDraws(
            r0=np.full(n_rep, state.r0),
            beta_tilde=np.repeat(state.beta_tilde[None, :], n_rep, 0),
            alpha_inv=np.full(n_rep, state.alpha_inv),
            mu=np.repeat(state.mu[None, :], n_rep, 0),
            sigma_beta2=np.full(n_rep, state.sigma_beta2),
            rho=np.full(n_rep, state.rho),
            eta=np.repeat(state.eta[None, :], n_rep, 0),
            sigma_gamma2=np.full(n_rep, state.sigma_gamma2),
            accept_rates={}, swap_accept_rates=np.array([]),
        )
        fc = forecast(draws, obs, default_prior_config(), horizon=10, seed=3)
        assert len(fc) == n_rep
        assert np.max(fc.Re_star) < 0.5
        med = fc.quantiles("B")["median"]
        assert np.all(np.diff(med) <= 1e-9)

    def test_feasibility_of_forecast_trajectories(self, scn1_small):
        obs, truth = scn1_small
        draws = _single_draw(obs, truth, sigma_beta2=0.05, sigma_gamma2=0.0625)
        cfg = default_prior_config()
        fc = forecast(draws, obs, cfg, horizon=12, seed=5, keep_trajectories=True)
        assert fc.trajectories is not None
        assert np.all(fc.trajectories >= 0)
        totals = fc.trajectories.sum(axis=2)
        N = obs.population.N
        assert np.all(np.abs(totals - N) <= 1e-6 * N)
        assert np.all(fc.B_star >= 0)

    def test_band_width_grows_with_horizon(self, scn1_small):
        # forecast-protocol setting: fit a training cut, project the rest
        from epinfer.sampler import SamplerConfig, run_sampler

        obs, _ = scn1_small
        train, test = train_test_split(obs, 25)
        cfg = SamplerConfig(n_chains=3, n_iter=3000, burn_in=1200, thin=6, rng_seed=21)
        draws = run_sampler(train, default_prior_config(), cfg)
        fc = forecast(draws, train, default_prior_config(), horizon=len(test.B), seed=11)
        q = fc.quantiles("B")
        width = q["hi95"] - q["lo95"]
        assert width[-1] >= width[0]

    def test_forecast_table_shape(self, scn1_small):
        obs, truth = scn1_small
        draws = _single_draw(obs, truth, sigma_beta2=0.02, sigma_gamma2=0.04)
        cfg = default_prior_config()
        fc = forecast(draws, obs, cfg, horizon=4, seed=0)
        rows = forecast_table(fc, obs, "B")
        assert len(rows) == 4
        assert rows[0]["date"] == obs.date(obs.T + 1).isoformat()
        assert set(rows[0]) == {"date", "median", "lo95", "hi95"}

    def test_bad_horizon(self, scn1_small):
        obs, truth = scn1_small
        draws = _single_draw(obs, truth)
        with pytest.raises(ValueError):
            forecast(draws, obs, default_prior_config(), horizon=0)
