import numpy as np
import pytest
from scipy.special import ndtri

from epinfer.diagnostics import (
    CHI2_95_THRESHOLD_4DF,
    DegenerateChain,
    bayesian_chi2,
    bayesian_chi2_null,
    geweke_z,
    qq_table,
)
from epinfer.model import LinkFunction, Observations, Population, link_inverse
from epinfer.sampler import PosteriorDraws

DAY0 = __import__("datetime").date(2020, 3, 1)


class TestGeweke:
    def test_stationary_chain_rarely_flags(self):
        hits = 0
        reps = 100
        for seed in range(100, 100 + reps):
            chain = 5.0 + 0.01 * np.random.default_rng(seed).standard_normal(10000)
            if abs(geweke_z(chain).z_score) < 3:
                hits += 1
        assert hits >= 99

    def test_level_shift_flags(self):
        rng = np.random.default_rng(0)
        chain = np.concatenate([rng.standard_normal(5000), 10.0 + rng.standard_normal(5000)])
        assert abs(geweke_z(chain).z_score) > 4

    def test_affine_invariance(self):
        chain = np.random.default_rng(3).standard_normal(2000).cumsum() * 0.1 + 2.0
        z = geweke_z(chain).z_score
        z_affine = geweke_z(-4.0 * chain + 11.0).z_score
        assert abs(abs(z_affine) - abs(z)) < 1e-10

    def test_short_chain_rejected(self):
        with pytest.raises(ValueError):
            geweke_z(np.zeros(99))

    def test_degenerate_chain(self):
        with pytest.raises(DegenerateChain):
            geweke_z(np.full(1000, 3.14))

    def test_segment_fractions_recorded(self):
        res = geweke_z(np.random.default_rng(1).standard_normal(500))
        assert res.segment_fractions == (0.1, 0.5)


def _draws_from_states(states):
    return PosteriorDraws(
        r0=np.array([s.r0 for s in states]),
        beta_tilde=np.stack([s.beta_tilde for s in states]),
        alpha_inv=np.array([s.alpha_inv for s in states]),
        mu=np.stack([s.mu for s in states]),
        sigma_beta2=np.array([s.sigma_beta2 for s in states]),
        rho=np.array([s.rho for s in states]),
        eta=np.stack([s.eta for s in states]),
        sigma_gamma2=np.array([s.sigma_gamma2 for s in states]),
        accept_rates={},
        swap_accept_rates=np.array([]),
    )


def _calibrated_case(u_values, N=1e6, alpha=0.15, I_U0=5000.0, I_D0=100.0, beta0=0.25):
    """Build (obs, state) whose diagnosis path hits the given PIT values exactly.

    Chooses gamma_t so that the standardized transformed rate equals
    ndtri(u_t) under eta = 0, sigma_gamma2 = 1, then generates B with those
    exact rates. Running the fit statistic on this pair reproduces u_t.
    """
    from epinfer.sampler import ParameterState

    T = len(u_values) - 1
    gamma_tilde = ndtri(np.asarray(u_values))
    gamma = link_inverse(gamma_tilde, LinkFunction.LOGIT)
    beta = np.full(T + 1, beta0)
    S, IU, ID, R = N - I_U0 - I_D0, I_U0, I_D0, 0.0
    B = np.empty(T + 1)
    for t in range(T + 1):
        B[t] = gamma[t] * (1 - alpha) * IU
        if t < T:
            ninf = beta[t] * S * (IU + ID) / N
            S, IU, ID, R = S - ninf, (1 - alpha) * IU + ninf - B[t], (1 - alpha) * ID + B[t], R + alpha * (IU + ID)
    obs = Observations(B, I_D0, Population(N), DAY0)
    state = ParameterState(
        r0=I_U0 / I_D0,
        beta_tilde=np.log(beta),
        alpha_inv=1.0 / alpha,
        mu=np.array([np.log(beta0), 0.0]),
        sigma_beta2=0.1,
        rho=0.8,
        eta=np.array([0.0]),
        sigma_gamma2=1.0,
    )
    return obs, state


class TestBayesianChi2:
    def test_perfectly_calibrated_counts_give_zero(self):
        # 80 PIT values filling the five bins exactly 16 times each
        G = 5
        u = np.concatenate([np.full(16, (g + 0.5) / G) for g in range(G)])
        obs, state = _calibrated_case(u)
        res = bayesian_chi2(_draws_from_states([state]), obs, LinkFunction.LOGIT)
        assert res.omega_draws[0] == pytest.approx(0.0, abs=1e-12)
        assert res.exceed_proportion == 0.0
        np.testing.assert_allclose(res.bin_edges, [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
        np.testing.assert_allclose(res.bin_probs, np.full(5, 0.2))

    def test_threshold_against_closed_form_cdf(self):
        # chi2 with 4 dof has CDF 1 - exp(-x/2) (1 + x/2): bisect it at 0.95
        lo, hi = 0.0, 50.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            cdf = 1.0 - np.exp(-mid / 2) * (1 + mid / 2)
            if cdf < 0.95:
                lo = mid
            else:
                hi = mid
        assert CHI2_95_THRESHOLD_4DF == pytest.approx(0.5 * (lo + hi), abs=1e-9)
        assert CHI2_95_THRESHOLD_4DF == pytest.approx(9.487729036781154, abs=1e-12)

    def test_time_permutation_invariance(self):
        rng = np.random.default_rng(11)
        u = rng.uniform(0.02, 0.98, 60)
        obs_a, state_a = _calibrated_case(u)
        perm = rng.permutation(60)
        obs_b, state_b = _calibrated_case(u[perm])
        res_a = bayesian_chi2(_draws_from_states([state_a]), obs_a, LinkFunction.LOGIT)
        res_b = bayesian_chi2(_draws_from_states([state_b]), obs_b, LinkFunction.LOGIT)
        assert res_a.omega_draws[0] == pytest.approx(res_b.omega_draws[0], abs=1e-9)

    def test_known_miscalibration(self):
        # everything lands in one bin: omega = sum (m_g - E)^2/E with m = (80,0,0,0,0)
        u = np.full(80, 0.1)
        obs, state = _calibrated_case(u)
        res = bayesian_chi2(_draws_from_states([state]), obs, LinkFunction.LOGIT)
        expected = (80 - 16.0) ** 2 / 16.0 + 4 * 16.0
        assert res.omega_draws[0] == pytest.approx(expected, abs=1e-9)
        assert res.exceed_proportion == 1.0

    def test_infeasible_draws_skipped(self):
        u = np.full(40, 0.5)
        obs, good = _calibrated_case(u)
        from epinfer.sampler import ParameterState

        bad = ParameterState(
            good.r0 / 1000.0, good.beta_tilde, good.alpha_inv, good.mu,
            good.sigma_beta2, good.rho, good.eta, good.sigma_gamma2,
        )
        res = bayesian_chi2(_draws_from_states([good, bad]), obs, LinkFunction.LOGIT)
        assert res.n_skipped == 1
        assert len(res.omega_draws) == 1

    def test_null_simulation_mean_near_dof(self):
        # draws scored against their own generated data: mean omega ~ G-1 = 4
        rng = np.random.default_rng(8)
        u = rng.uniform(0.02, 0.98, 80)
        obs, state = _calibrated_case(u)
        states = []
        for i in range(150):
            states.append(state)
        res = bayesian_chi2_null(_draws_from_states(states), obs, LinkFunction.LOGIT, seed=2)
        mean_omega = float(np.mean(res.omega_draws))
        assert abs(mean_omega - 4.0) <= 0.2 * 4.0
        assert res.n_skipped == 0

    def test_null_simulation_deterministic(self):
        u = np.random.default_rng(9).uniform(0.05, 0.95, 40)
        obs, state = _calibrated_case(u)
        draws = _draws_from_states([state] * 20)
        a = bayesian_chi2_null(draws, obs, LinkFunction.LOGIT, seed=3)
        b = bayesian_chi2_null(draws, obs, LinkFunction.LOGIT, seed=3)
        np.testing.assert_array_equal(a.omega_draws, b.omega_draws)

    def test_qq_table_monotone(self):
        rng = np.random.default_rng(2)
        u = rng.uniform(0.02, 0.98, 60)
        obs, state = _calibrated_case(u)
        states = []
        for _ in range(10):
            states.append(state)
        res = bayesian_chi2(_draws_from_states(states), obs, LinkFunction.LOGIT)
        rows = qq_table(res)
        assert len(rows) == 10
        theo = [r["theoretical_quantile"] for r in rows]
        assert all(theo[i] <= theo[i + 1] for i in range(len(theo) - 1))
