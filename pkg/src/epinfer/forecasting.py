"""Posterior predictive simulation of future confirmed cases and Re(t).

Each posterior draw is pushed forward independently: extend the log
transmission rate by its process-prior conditional, then alternate drawing a
diagnosis rate and stepping the compartment recursion, so the generated
counts feed back into the latent dynamics exactly as during estimation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model
from .gp import GpSpec, default_design, gp_conditional, gp_sample_conditional
from .model import LinkFunction, Observations
from .priors import PriorConfig
from .sampler import PosteriorDraws

__all__ = ["ForecastDraws", "forecast", "train_test_split", "forecast_table"]


@dataclass
class ForecastDraws:
    """Per-draw future counts and effective reproduction numbers."""

    B_star: np.ndarray  # (n_draws, T*)
    Re_star: np.ndarray  # (n_draws, T*)
    horizon: int
    n_resampled: int = 0
    trajectories: np.ndarray | None = None  # (n_draws, T*, 4): S, I_U, I_D, R

    def __len__(self) -> int:
        return self.B_star.shape[0]

    def quantiles(self, which: str = "B") -> dict[str, np.ndarray]:
        """Median and central 95% band per horizon day (type-7 interpolation)."""
        mat = self.B_star if which == "B" else self.Re_star
        qs = np.quantile(mat, [0.5, 0.025, 0.975], axis=0)
        return {"median": qs[0], "lo95": qs[1], "hi95": qs[2]}


def train_test_split(obs: Observations, t_star: int) -> tuple[Observations, Observations]:
    """Split at the cut index: training keeps B_0..B_{t*}, testing the rest.

    The training anchor (I_D0, day-0 date) is unchanged; the testing series
    carries the same population with its dates shifted to start at t*+1.
    """
    if not 0 < t_star < obs.T:
        raise IndexError(f"t_star must be in (0, {obs.T}), got {t_star}")
    train = Observations(
        B=obs.B[: t_star + 1].copy(),
        I_D0=obs.I_D0,
        population=obs.population,
        day0_date=obs.day0_date,
        region=obs.region,
    )
    test = Observations(
        B=obs.B[t_star + 1 :].copy(),
        I_D0=obs.I_D0,
        population=obs.population,
        day0_date=obs.date(t_star + 1),
        region=obs.region,
    )
    return train, test


def _forecast_one(
    state_idx: int,
    draws: PosteriorDraws,
    obs: Observations,
    link: LinkFunction,
    X: np.ndarray,
    X_star: np.ndarray,
    Y_star: np.ndarray,
    horizon: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
    """Push one posterior draw through the horizon; None if infeasible."""
    theta = draws.state(state_idx)
    params = theta.epidemic_params(obs.I_D0)
    v0 = model.initial_state(params.I_U0, obs.I_D0, obs.population)
    try:
        traj = model.propagate(v0, params, obs.B, obs.population)
    except (model.InfeasibleTrajectory, ValueError):
        return None

    spec = GpSpec(X, theta.mu, theta.sigma_beta2, theta.rho)
    cond = gp_conditional(theta.beta_tilde, spec, X_star)
    beta_star = np.exp(gp_sample_conditional(cond, rng))

    alpha = params.alpha
    N = obs.population.N
    T = obs.T
    S, IU, ID, R = traj.S[T], traj.I_U[T], traj.I_D[T], traj.R[T]
    B_prev = float(obs.B[T])
    beta_prev = float(params.beta[T])
    b_out = np.empty(horizon)
    re_out = np.empty(horizon)
    v_out = np.empty((horizon, 4))
    for h in range(horizon):
        # step T+h -> T+h+1 with the previous day's count
        iu_prev, id_prev = IU, ID
        new_inf = beta_prev * S * (iu_prev + id_prev) / N
        S = S - new_inf
        IU = (1.0 - alpha) * iu_prev + new_inf - B_prev
        ID = (1.0 - alpha) * id_prev + B_prev
        R = R + alpha * (iu_prev + id_prev)
        if min(S, IU, ID) < 0:
            return None
        gamma_tilde = float(
            Y_star[h] @ theta.eta + np.sqrt(theta.sigma_gamma2) * rng.standard_normal()
        )
        gamma = model.link_inverse(gamma_tilde, link)
        B_new = gamma * (1.0 - alpha) * IU
        B_new = min(max(B_new, 0.0), (1.0 - alpha) * IU)  # defensive feasibility clamp
        b_out[h] = B_new
        re_out[h] = beta_star[h] * S / (alpha * N)
        v_out[h] = (S, IU, ID, R)
        B_prev = B_new
        beta_prev = float(beta_star[h])
    return b_out, re_out, v_out


def forecast(
    draws: PosteriorDraws,
    obs: Observations,
    prior_cfg: PriorConfig,
    horizon: int,
    seed: int = 0,
    gp_design: np.ndarray | None = None,
    Y_star: np.ndarray | None = None,
    keep_trajectories: bool = False,
) -> ForecastDraws:
    """Sample the posterior predictive of the next `horizon` days.

    For each retained draw: (a) sample the future log transmission rates from
    the process conditional; (b) rebuild the trajectory to time T; (c) step
    forward one day at a time, drawing a diagnosis rate, converting it to a
    count, and feeding that count into the next step. Per-draw RNG streams
    are keyed to (seed, draw index), so results are scheduling-independent.
    Rare infeasible pushes are resampled once, then skipped with a count.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if len(draws) == 0:
        raise ValueError("no posterior draws")
    T = obs.T
    X = np.atleast_2d(gp_design) if gp_design is not None else default_design(T)
    X_star = _extend_design(X, horizon)
    q = draws.eta.shape[1]
    if Y_star is None:
        Y_star = np.ones((horizon, q))
    Y_star = np.atleast_2d(np.asarray(Y_star, float))

    n = len(draws)
    B_star = np.zeros((n, horizon))
    Re_star = np.zeros((n, horizon))
    trajs = np.zeros((n, horizon, 4)) if keep_trajectories else None
    n_resampled = 0
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        out = _forecast_one(i, draws, obs, prior_cfg.link, X, X_star, Y_star, horizon, rng)
        if out is None:
            n_resampled += 1
            out = _forecast_one(
                i, draws, obs, prior_cfg.link, X, X_star, Y_star, horizon, rng
            )
        if out is None:
            keep[i] = False
            continue
        B_star[i], Re_star[i] = out[0], out[1]
        if trajs is not None:
            trajs[i] = out[2]
    if not np.all(keep):
        B_star, Re_star = B_star[keep], Re_star[keep]
        if trajs is not None:
            trajs = trajs[keep]
    return ForecastDraws(B_star, Re_star, horizon, n_resampled, trajs)


def _extend_design(X: np.ndarray, horizon: int) -> np.ndarray:
    """Future design rows: continue the time column, keep other columns at
    their final value (intercept stays 1)."""
    T1 = X.shape[0]
    rows = np.repeat(X[-1:, :], horizon, axis=0)
    if X.shape[1] >= 2 and np.allclose(X[:, 0], 1.0):
        step = X[-1, 1] - X[-2, 1] if T1 >= 2 else 1.0
        rows[:, 1] = X[-1, 1] + step * np.arange(1, horizon + 1)
    return rows


def forecast_table(fc: ForecastDraws, obs: Observations, which: str = "B") -> list[dict]:
    """Plot-ready rows: date, median, lo95, hi95 for each horizon day."""
    qs = fc.quantiles(which)
    rows = []
    for h in range(fc.horizon):
        rows.append(
            {
                "date": obs.date(obs.T + 1 + h).isoformat(),
                "median": float(qs["median"][h]),
                "lo95": float(qs["lo95"][h]),
                "hi95": float(qs["hi95"][h]),
            }
        )
    return rows
