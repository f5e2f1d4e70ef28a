"""Parallel-tempering Metropolis-within-Gibbs sampler for the epidemic model.

Chain j targets  [likelihood]^(1/Delta_j) * prior  with a decreasing
temperature ladder ending at Delta_J = 1; draws are kept from that final
(cold) chain. Each iteration sweeps all chains through eight blocks in fixed
order, then proposes swaps between adjacent pairs.

Two implementations live here: `gibbs_sweep` / `pt_swap` are the readable
reference (used by tests and for small experiments), and `run_sampler` drives
the compiled kernels in `_kernels` for production runs. Both consume the same
per-iteration random layout, so they can be cross-checked draw for draw.

Tempered conjugate updates (only the likelihood is tempered):
  eta | ...  is normal with precision  P_eta + Y'Y/(Delta*sg2)  — likelihood
             sufficient statistics scaled by 1/Delta;
  sg2 | ...  is Inv-Ga(a_g + (T+1)/(2*Delta), b_g + SSR/(2*Delta));
  mu, sb2    condition only on the untempered process prior of beta_tilde,
             so their conditionals are the usual ones, independent of Delta.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, model, priors
from .gp import GpSpec, default_design, gp_log_density
from .model import EpidemicParams, LinkFunction, Observations
from .priors import PriorConfig

__all__ = [
    "ParameterState",
    "TemperatureLadder",
    "SamplerConfig",
    "PosteriorDraws",
    "ConfigError",
    "tempered_log_target",
    "gibbs_sweep",
    "pt_swap",
    "pt_swap_log_accept",
    "run_sampler",
    "mu_conditional",
    "eta_conditional",
    "sigma_beta2_conditional",
    "sigma_gamma2_conditional",
]


class ConfigError(ValueError):
    """Invalid sampler configuration."""


@dataclass(frozen=True)
class ParameterState:
    """One full sampler state.

    r0 is the ratio I_U0/I_D0 (so I_U0 = r0 * I_D0), beta_tilde the log
    transmission rates, alpha_inv >= 1 the mean infectious period.
    """

    r0: float
    beta_tilde: np.ndarray
    alpha_inv: float
    mu: np.ndarray
    sigma_beta2: float
    rho: float
    eta: np.ndarray
    sigma_gamma2: float

    def __post_init__(self):
        object.__setattr__(self, "beta_tilde", np.asarray(self.beta_tilde, float))
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, float)))
        object.__setattr__(self, "eta", np.atleast_1d(np.asarray(self.eta, float)))
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")
        if not self.alpha_inv >= 1:
            raise ValueError("alpha_inv must be >= 1")
        if not 0 < self.rho < 1:
            raise ValueError("rho must be in (0,1)")
        if not (self.sigma_beta2 > 0 and self.sigma_gamma2 > 0):
            raise ValueError("variances must be positive")

    @property
    def alpha(self) -> float:
        return 1.0 / self.alpha_inv

    def epidemic_params(self, I_D0: float) -> EpidemicParams:
        return EpidemicParams(self.r0 * I_D0, np.exp(self.beta_tilde), self.alpha)


@dataclass(frozen=True)
class TemperatureLadder:
    """Decreasing temperatures Delta_1 > ... > Delta_J = 1."""

    deltas: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "deltas", np.asarray(self.deltas, float))
        d = self.deltas
        if len(d) < 1 or d[-1] != 1.0:
            raise ConfigError("ladder must end at exactly 1")
        if len(d) > 1 and np.any(np.diff(d) >= 0):
            raise ConfigError("ladder must be strictly decreasing")

    @classmethod
    def geometric(cls, n_chains: int, base: float = 1.5) -> "TemperatureLadder":
        """Delta_j = base^(J-j) for j = 1..J."""
        if n_chains < 1:
            raise ConfigError("need at least one chain")
        if base <= 1.0:
            raise ConfigError("ladder base must exceed 1")
        return cls(base ** np.arange(n_chains - 1, -1, -1, dtype=float))

    def __len__(self) -> int:
        return len(self.deltas)


@dataclass(frozen=True)
class ProposalScales:
    """Initial random-walk scales on the transformed spaces.

    r0_remap seeds the pool-scaling variant of the r0 block; None reuses r0.
    """

    r0: float = 0.3
    beta_site: float = 0.3
    alpha_inv: float = 0.1
    rho: float = 0.8
    r0_remap: float | None = None

    def remap_scale(self) -> float:
        return self.r0 if self.r0_remap is None else self.r0_remap


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 10
    ladder: TemperatureLadder | None = None
    n_iter: int = 50000
    burn_in: int = 20000
    thin: int = 30
    swap_every: int = 1
    rng_seed: int = 0
    scales: ProposalScales = field(default_factory=ProposalScales)
    adapt: bool = True
    adapt_window: int = 100
    ladder_base: float = 1.5
    max_init_tries: int = 100

    def __post_init__(self):
        if self.burn_in >= self.n_iter:
            raise ConfigError("burn_in must be smaller than n_iter")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.swap_every < 1:
            raise ConfigError("swap_every must be >= 1")
        if self.ladder is not None and len(self.ladder) != self.n_chains:
            raise ConfigError("ladder length must equal n_chains")

    def resolved_ladder(self) -> TemperatureLadder:
        if self.ladder is not None:
            return self.ladder
        return TemperatureLadder.geometric(self.n_chains, self.ladder_base)

    @property
    def n_draws(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


SCALAR_COLUMNS = ("r0", "alpha_inv", "sigma_beta2", "rho", "sigma_gamma2")


@dataclass
class PosteriorDraws:
    """Thinned cold-chain draws plus acceptance diagnostics and Re(t) paths."""

    r0: np.ndarray
    beta_tilde: np.ndarray
    alpha_inv: np.ndarray
    mu: np.ndarray
    sigma_beta2: np.ndarray
    rho: np.ndarray
    eta: np.ndarray
    sigma_gamma2: np.ndarray
    accept_rates: dict
    swap_accept_rates: np.ndarray
    log_lik: np.ndarray | None = None
    re_paths: np.ndarray | None = None
    final_states: list | None = None  # per-chain states at the last iteration
    final_scales: dict | None = None  # per-chain proposal scales (frozen at burn-in)

    def __len__(self) -> int:
        return len(self.r0)

    @property
    def T(self) -> int:
        return self.beta_tilde.shape[1] - 1

    def state(self, i: int) -> ParameterState:
        return ParameterState(
            float(self.r0[i]),
            self.beta_tilde[i],
            float(self.alpha_inv[i]),
            self.mu[i],
            float(self.sigma_beta2[i]),
            float(self.rho[i]),
            self.eta[i],
            float(self.sigma_gamma2[i]),
        )

    def column_names(self) -> list[str]:
        names = list(SCALAR_COLUMNS)
        names += [f"mu_{a}" for a in range(self.mu.shape[1])]
        names += [f"eta_{a}" for a in range(self.eta.shape[1])]
        names += [f"beta_tilde_{t}" for t in range(self.beta_tilde.shape[1])]
        return names

    def to_matrix(self) -> np.ndarray:
        return np.column_stack(
            [
                self.r0,
                self.alpha_inv,
                self.sigma_beta2,
                self.rho,
                self.sigma_gamma2,
                self.mu,
                self.eta,
                self.beta_tilde,
            ]
        )

    def to_csv(self, path) -> None:
        """One row per draw; beta_tilde columns named beta_tilde_0..beta_tilde_T."""
        mat = self.to_matrix()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.column_names())
            for row in mat:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "PosteriorDraws":
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            rows = [[float(v) for v in row] for row in r if row]
        if not rows:
            raise ValueError(f"no draws in {path}")
        mat = np.asarray(rows)
        cols = {name: i for i, name in enumerate(header)}
        p = sum(1 for n in header if n.startswith("mu_"))
        q = sum(1 for n in header if n.startswith("eta_"))
        n_bt = sum(1 for n in header if n.startswith("beta_tilde_"))
        for required in SCALAR_COLUMNS:
            if required not in cols:
                raise ValueError(f"missing column {required!r} in {path}")
        return cls(
            r0=mat[:, cols["r0"]],
            beta_tilde=mat[:, [cols[f"beta_tilde_{t}"] for t in range(n_bt)]],
            alpha_inv=mat[:, cols["alpha_inv"]],
            mu=mat[:, [cols[f"mu_{a}"] for a in range(p)]],
            sigma_beta2=mat[:, cols["sigma_beta2"]],
            rho=mat[:, cols["rho"]],
            eta=mat[:, [cols[f"eta_{a}"] for a in range(q)]],
            sigma_gamma2=mat[:, cols["sigma_gamma2"]],
            accept_rates={},
            swap_accept_rates=np.array([]),
        )

    def compute_re_paths(self, obs: Observations) -> np.ndarray:
        """Re(t) per draw, skipping (NaN-filling) infeasible draws."""
        n = len(self)
        out = np.full((n, self.T + 1), np.nan)
        for i in range(n):
            params = self.state(i).epidemic_params(obs.I_D0)
            v0 = model.initial_state(params.I_U0, obs.I_D0, obs.population)
            try:
                traj = model.propagate(v0, params, obs.B, obs.population)
            except (model.InfeasibleTrajectory, ValueError):
                continue
            _, re = model.reproduction_numbers(traj, params, obs.population)
            out[i] = re
        return out

    def summary(self) -> dict:
        """Posterior medians and central 95% intervals for every column."""
        mat = self.to_matrix()
        qs = np.quantile(mat, [0.5, 0.025, 0.975], axis=0)
        per_param = {
            name: {
                "median": float(qs[0, i]),
                "q2.5": float(qs[1, i]),
                "q97.5": float(qs[2, i]),
            }
            for i, name in enumerate(self.column_names())
        }
        return {
            "n_draws": len(self),
            "params": per_param,
            "acceptance": {k: np.asarray(v).tolist() for k, v in self.accept_rates.items()},
            "swap_acceptance": np.asarray(self.swap_accept_rates).tolist(),
        }

    def save_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# log target pieces


def _hook_loglik(fixed_gt: np.ndarray, eta: np.ndarray, sg2: float, Y: np.ndarray) -> float:
    resid = fixed_gt - Y @ eta
    n = len(fixed_gt)
    return float(-0.5 * n * np.log(2 * np.pi * sg2) - 0.5 * np.sum(resid**2) / sg2)


def state_log_likelihood(
    theta: ParameterState,
    obs: Observations,
    link: LinkFunction,
    Y: np.ndarray | None = None,
    fixed_gamma_tilde: np.ndarray | None = None,
) -> float:
    if Y is None:
        Y = np.ones((obs.T + 1, len(theta.eta)))
    if fixed_gamma_tilde is not None:
        return _hook_loglik(fixed_gamma_tilde, theta.eta, theta.sigma_gamma2, Y)
    params = theta.epidemic_params(obs.I_D0)
    return model.log_likelihood(params, theta.eta, theta.sigma_gamma2, obs, link, Y)


def tempered_log_target(
    theta: ParameterState,
    delta: float,
    obs: Observations,
    prior_cfg: PriorConfig,
    X: np.ndarray,
    Y: np.ndarray | None = None,
    fixed_gamma_tilde: np.ndarray | None = None,
) -> float:
    """(1/delta) * log-likelihood + log prior; only the likelihood is tempered."""
    if delta < 1.0:
        raise ConfigError("temperatures must be >= 1")
    lp = priors.log_prior(
        theta.r0,
        theta.beta_tilde,
        theta.alpha_inv,
        theta.mu,
        theta.sigma_beta2,
        theta.rho,
        theta.eta,
        theta.sigma_gamma2,
        prior_cfg,
        X,
        obs.I_D0,
    )
    if not np.isfinite(lp):
        return -np.inf
    ll = state_log_likelihood(theta, obs, prior_cfg.link, Y, fixed_gamma_tilde)
    if not np.isfinite(ll):
        return -np.inf
    return ll / delta + lp


# ---------------------------------------------------------------------------
# conjugate conditionals (documented derivations; used by both routes)


def _mu_precision(
    beta_tilde: np.ndarray, sigma_beta2: float, rho: float, cfg: PriorConfig, X: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Precision matrix and shift vector of the mu conditional."""
    X = np.atleast_2d(X)
    P = np.linalg.inv(cfg.mu_cov)
    b = P @ cfg.mu_mean
    v0 = 1.0 / sigma_beta2
    P = P + v0 * np.outer(X[0], X[0])
    b = b + v0 * X[0] * beta_tilde[0]
    v = 1.0 / (sigma_beta2 * (1.0 - rho**2))
    Xt = X[1:] - rho * X[:-1]
    zt = beta_tilde[1:] - rho * beta_tilde[:-1]
    P = P + v * Xt.T @ Xt
    b = b + v * Xt.T @ zt
    return P, b


def mu_conditional(
    beta_tilde: np.ndarray, sigma_beta2: float, rho: float, cfg: PriorConfig, X: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Exact normal conditional of mu given the process path.

    AR(1) whitening turns beta_tilde ~ N(X mu, C) into independent residuals
    with design xt~ = x_t - rho x_{t-1} (x0~ = x_0) and weights 1/sb2 for
    t = 0, 1/(sb2 (1 - rho^2)) otherwise; combine with the N(mu*, S_mu) prior.
    Returns (mean, covariance).
    """
    P, b = _mu_precision(beta_tilde, sigma_beta2, rho, cfg, X)
    cov = np.linalg.inv(P)
    return cov @ b, cov


def sigma_beta2_conditional(
    beta_tilde: np.ndarray, mu: np.ndarray, rho: float, cfg: PriorConfig, X: np.ndarray
) -> tuple[float, float]:
    """Inv-Ga(shape, rate) conditional of sigma_beta2 (untempered: prior level)."""
    m = np.atleast_2d(X) @ mu
    d = beta_tilde - m
    Q = d[0] ** 2 + np.sum((d[1:] - rho * d[:-1]) ** 2) / (1.0 - rho**2)
    shape = cfg.sigma_beta2_shape + 0.5 * (len(beta_tilde))
    # (T+1)/2 data terms: one marginal plus T innovations
    return float(shape), float(cfg.sigma_beta2_rate + 0.5 * Q)


def _eta_precision(
    gamma_tilde: np.ndarray, sigma_gamma2: float, delta: float, cfg: PriorConfig, Y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    Y = np.atleast_2d(Y)
    P = np.linalg.inv(cfg.eta_cov)
    b = P @ cfg.eta_mean
    scale = 1.0 / (delta * sigma_gamma2)
    P = P + scale * Y.T @ Y
    b = b + scale * Y.T @ gamma_tilde
    return P, b


def eta_conditional(
    gamma_tilde: np.ndarray, sigma_gamma2: float, delta: float, cfg: PriorConfig, Y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Normal conditional of eta with likelihood statistics scaled by 1/delta."""
    P, b = _eta_precision(gamma_tilde, sigma_gamma2, delta, cfg, Y)
    cov = np.linalg.inv(P)
    return cov @ b, cov


def sigma_gamma2_conditional(
    gamma_tilde: np.ndarray, eta: np.ndarray, delta: float, cfg: PriorConfig, Y: np.ndarray
) -> tuple[float, float]:
    """Inv-Ga(shape, rate) conditional of sigma_gamma2 under tempering."""
    resid = gamma_tilde - np.atleast_2d(Y) @ eta
    n = len(gamma_tilde)
    shape = cfg.sigma_gamma2_shape + 0.5 * n / delta
    rate = cfg.sigma_gamma2_rate + 0.5 * float(np.sum(resid**2)) / delta
    return float(shape), float(rate)


# ---------------------------------------------------------------------------
# reference sweep (pure Python, mirrors the compiled kernel draw for draw)


def draw_sweep_randoms(
    rng: np.random.Generator, T: int, p: int, q: int, a_sb_post: float, a_sg_post: float
) -> dict:
    """Per-sweep random bundle, in the same order the block driver uses."""
    return {
        "z_r0": float(rng.standard_normal()),
        "u_r0": float(rng.random()),
        "z_bt": rng.standard_normal(T + 1),
        "u_bt": rng.random(T + 1),
        "z_al": float(rng.standard_normal()),
        "u_al": float(rng.random()),
        "z_mu": rng.standard_normal(p),
        "g_sb": float(rng.standard_gamma(a_sb_post)),
        "z_rho": float(rng.standard_normal()),
        "u_rho": float(rng.random()),
        "z_eta": rng.standard_normal(q),
        "g_sg": float(rng.standard_gamma(a_sg_post)),
        "z_r0b": float(rng.standard_normal()),
        "u_r0b": float(rng.random()),
        "z_rhob": float(rng.standard_normal()),
        "u_rhob": float(rng.random()),
        "z_r0c": float(rng.standard_normal()),
        "u_r0c": float(rng.random()),
    }


def _accept(log_alpha: float, u: float) -> bool:
    return log_alpha >= 0.0 or u < math.exp(log_alpha)


def _ridge_move(
    r0: float,
    bt: np.ndarray,
    alpha_inv: float,
    eta: np.ndarray,
    obs: Observations,
    cfg: PriorConfig,
    X: np.ndarray,
    Y: np.ndarray,
    step: float,
    ridge: bool,
    mu: np.ndarray,
    sb2: float,
    rho: float,
) -> tuple[np.ndarray, np.ndarray, float] | None:
    """Deterministic pool-scaling remap for the r0 ridge proposal.

    Scales the undocumented pool by c = exp(step) and solves forward for the
    transmission path that reproduces the scaled pool against the same
    observed counts. Returns (beta_tilde', eta', extra log terms) where the
    extra terms are the triangular-map Jacobian, the process-prior ratio of
    the remapped path, and the prior ratio of the shifted eta intercept; None
    when the remap is infeasible.
    """
    T = obs.T
    N = obs.population.N
    alpha = 1.0 / alpha_inv
    cfac = math.exp(step)
    beta = np.exp(bt)
    B = obs.B
    IU0 = r0 * obs.I_D0

    # current trajectory (caller guarantees feasibility)
    v0 = model.initial_state(IU0, obs.I_D0, obs.population)
    traj = model.propagate(v0, EpidemicParams(IU0, beta, alpha), B, obs.population)
    S, IU, ID = traj.S, traj.I_U, traj.I_D

    S_p = N - cfac * IU0 - obs.I_D0
    if S_p <= 0:
        return None
    bt_prop = np.empty(T + 1)
    logjac = 0.0
    for t in range(T + 1):
        newinf = beta[t] * S[t] * (IU[t] + ID[t]) / N
        newinf_p = cfac * newinf - (cfac - 1.0) * B[t]
        if newinf_p <= 0:
            return None
        beta_p = newinf_p * N / (S_p * (cfac * IU[t] + ID[t]))
        bt_prop[t] = math.log(beta_p)
        logjac += (
            step
            + math.log(S[t]) - math.log(S_p)
            + math.log(IU[t] + ID[t]) - math.log(cfac * IU[t] + ID[t])
            + bt[t] - bt_prop[t]
        )
        if t < T:
            S_p = S_p - newinf_p
            if S_p <= 0:
                return None

    extra = logjac
    extra += gp_log_density(bt_prop, GpSpec(X, mu, sb2, rho))
    extra -= gp_log_density(bt, GpSpec(X, mu, sb2, rho))
    eta_prop = eta.copy()
    if ridge:
        shift = -step
        eta_prop[0] += shift
        P = np.linalg.inv(cfg.eta_cov)
        b = P @ cfg.eta_mean
        extra += float(-shift * (P @ eta)[0] - 0.5 * shift**2 * P[0, 0] + shift * b[0])
    return bt_prop, eta_prop, extra


def _path_level_move(
    r0: float,
    bt: np.ndarray,
    alpha_inv: float,
    eta: np.ndarray,
    obs: Observations,
    cfg: PriorConfig,
    X: np.ndarray,
    Y: np.ndarray,
    step: float,
    ridge: bool,
    mu: np.ndarray,
    sb2: float,
    rho: float,
) -> tuple[np.ndarray, np.ndarray, float] | None:
    """Pool-scaling remap with the initial pool pinned (path level vs eta).

    Scales the undocumented pool path by c = exp(step) for t >= 1, solving
    forward for the transmission path, with the eta intercept shifted by
    -step. Returns (beta_tilde', eta', extra log terms) or None if the remap
    is infeasible. The extra terms carry the triangular-map Jacobian, the
    process-prior ratio, and the eta prior ratio; r0 is untouched, so no
    gamma-prior or log-transform terms appear.
    """
    T = obs.T
    N = obs.population.N
    alpha = 1.0 / alpha_inv
    cfac = math.exp(step)
    beta = np.exp(bt)
    B = obs.B
    IU0 = r0 * obs.I_D0

    v0 = model.initial_state(IU0, obs.I_D0, obs.population)
    traj = model.propagate(v0, EpidemicParams(IU0, beta, alpha), B, obs.population)
    S, IU, ID = traj.S, traj.I_U, traj.I_D

    S_p = S[0]
    bt_prop = np.empty(T + 1)
    logjac = 0.0
    for t in range(T + 1):
        iu_p = IU[t] if t == 0 else cfac * IU[t]
        newinf = beta[t] * S[t] * (IU[t] + ID[t]) / N
        newinf_p = cfac * newinf - (cfac - 1.0) * B[t]
        if t == 0:
            newinf_p += (cfac - 1.0) * (1.0 - alpha) * IU[0]
        if newinf_p <= 0:
            return None
        beta_p = newinf_p * N / (S_p * (iu_p + ID[t]))
        bt_prop[t] = math.log(beta_p)
        logjac += (
            step
            + math.log(S[t]) - math.log(S_p)
            + math.log(IU[t] + ID[t]) - math.log(iu_p + ID[t])
            + bt[t] - bt_prop[t]
        )
        if t < T:
            S_p = S_p - newinf_p
            if S_p <= 0:
                return None

    extra = logjac
    extra += gp_log_density(bt_prop, GpSpec(X, mu, sb2, rho))
    extra -= gp_log_density(bt, GpSpec(X, mu, sb2, rho))
    eta_prop = eta.copy()
    if ridge:
        shift = -step
        eta_prop[0] += shift
        P = np.linalg.inv(cfg.eta_cov)
        b = P @ cfg.eta_mean
        extra += float(-shift * (P @ eta)[0] - 0.5 * shift**2 * P[0, 0] + shift * b[0])
    return bt_prop, eta_prop, extra


def gibbs_sweep(
    theta: ParameterState,
    delta: float,
    obs: Observations,
    prior_cfg: PriorConfig,
    X: np.ndarray,
    Y: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    scales: ProposalScales | None = None,
    draws: dict | None = None,
    fixed_gamma_tilde: np.ndarray | None = None,
) -> tuple[ParameterState, dict]:
    """One full sweep over the eight parameter blocks, in fixed order.

    Blocks: (1) r0 via log random walk; (2) each beta_tilde site via random
    walk with its AR(1) prior conditional; (3) alpha_inv via random walk on
    log(alpha_inv - 1); (4) mu exact conjugate; (5) sigma_beta2 exact
    conjugate; (6) rho via logit random walk; (7) eta tempered conjugate;
    (8) sigma_gamma2 tempered conjugate. Jacobians of the log/logit
    transforms enter the acceptance ratios of blocks 1, 3, 6.

    Either `rng` or a pre-drawn `draws` bundle must be supplied. Returns the
    updated state and per-block acceptance flags (conjugate blocks are always
    accepted).
    """
    T = obs.T
    cfg = prior_cfg
    link = cfg.link
    if Y is None:
        Y = np.ones((T + 1, len(theta.eta)))
    if scales is None:
        scales = ProposalScales()
    p, q = len(theta.mu), len(theta.eta)
    if draws is None:
        if rng is None:
            raise ValueError("need rng or draws")
        a_sb_post = cfg.sigma_beta2_shape + 0.5 * (T + 1)
        a_sg_post = cfg.sigma_gamma2_shape + 0.5 * (T + 1) / delta
        draws = draw_sweep_randoms(rng, T, p, q, a_sb_post, a_sg_post)
    inv_delta = 1.0 / delta

    r0 = theta.r0
    bt = theta.beta_tilde.copy()
    alpha_inv = theta.alpha_inv
    mu = theta.mu.copy()
    sb2 = theta.sigma_beta2
    rho = theta.rho
    eta = theta.eta.copy()
    sg2 = theta.sigma_gamma2
    accepts = {"beta_tilde": np.zeros(T + 1, dtype=bool)}

    def loglik(r0v, btv, alv, etav, sg2v):
        st = ParameterState(r0v, btv, alv, mu, sb2, rho, etav, sg2v)
        return state_log_likelihood(st, obs, link, Y, fixed_gamma_tilde)

    ll = loglik(r0, bt, alpha_inv, eta, sg2)
    if not np.isfinite(ll):
        raise ValueError("gibbs_sweep requires a state with finite likelihood")

    # block 1: two random walks on log r0, both shifting the intercept of
    # eta by -step (the transformed diagnosis rates move by about -log c when
    # the pool scales by c). Move 1a keeps the transmission path fixed and is
    # robust everywhere; move 1b also remaps the path so the whole pool
    # scales by c (the exact weakly-identified family), walking the cold
    # posterior ridge. The remap is deterministic and triangular in
    # (log r0, beta_tilde), so its diagonal derivatives and the process-prior
    # ratio of the remapped path enter the acceptance.
    ridge = bool(np.all(Y[:, 0] == 1.0))

    def eta_shift_prior_delta(shift):
        P = np.linalg.inv(cfg.eta_cov)
        b = P @ cfg.eta_mean
        return float(-shift * (P @ eta)[0] - 0.5 * shift**2 * P[0, 0] + shift * b[0])

    # -- move 1a: level shift --
    step = scales.r0 * draws["z_r0"]
    r0_prop = r0 * math.exp(step)
    accepts["r0"] = False
    if step == 0.0:
        accepts["r0"] = True  # identity proposal
    else:
        eta_prop = eta.copy()
        if ridge:
            eta_prop[0] -= step
        ll_prop = loglik(r0_prop, bt, alpha_inv, eta_prop, sg2)
        if np.isfinite(ll_prop):
            la = inv_delta * (ll_prop - ll)
            la += (cfg.i_u0_ratio_shape - 1.0) * step
            la -= cfg.i_u0_ratio_rate * (r0_prop - r0)
            la += step  # log transform Jacobian
            if ridge:
                la += eta_shift_prior_delta(-step)
            if _accept(la, draws["u_r0"]):
                r0, eta, ll = r0_prop, eta_prop, ll_prop
                accepts["r0"] = True

    # -- move 1b: pool-scaling remap --
    step = scales.remap_scale() * draws["z_r0b"]
    r0_prop = r0 * math.exp(step)
    accepts["r0_ridge"] = False
    if step == 0.0:
        accepts["r0_ridge"] = True
    elif fixed_gamma_tilde is not None:
        la = (cfg.i_u0_ratio_shape - 1.0) * step
        la -= cfg.i_u0_ratio_rate * (r0_prop - r0)
        la += step
        if _accept(la, draws["u_r0b"]):
            r0 = r0_prop
            accepts["r0_ridge"] = True
    else:
        prop = _ridge_move(
            r0, bt, alpha_inv, eta, obs, cfg, X, Y, step, ridge, mu, sb2, rho
        )
        if prop is not None:
            bt_prop, eta_prop, la_extra = prop
            ll_prop = loglik(r0_prop, bt_prop, alpha_inv, eta_prop, sg2)
            if np.isfinite(ll_prop):
                la = inv_delta * (ll_prop - ll)
                la += (cfg.i_u0_ratio_shape - 1.0) * step
                la -= cfg.i_u0_ratio_rate * (r0_prop - r0)
                la += step  # log r0 transform Jacobian
                la += la_extra  # remap Jacobian + process/eta prior ratios
                if _accept(la, draws["u_r0b"]):
                    r0, bt, eta, ll = r0_prop, bt_prop, eta_prop, ll_prop
                    accepts["r0_ridge"] = True

    # -- move 1c: path-level remap at fixed initial pool (see the kernel):
    # scales the pool path by c for t >= 1 only, trading the transmission
    # level against eta without touching r0
    step = scales.remap_scale() * draws["z_r0c"]
    accepts["path_level"] = False
    if step == 0.0:
        accepts["path_level"] = True
    elif fixed_gamma_tilde is None:
        prop = _path_level_move(
            r0, bt, alpha_inv, eta, obs, cfg, X, Y, step, ridge, mu, sb2, rho
        )
        if prop is not None:
            bt_prop, eta_prop, la_extra = prop
            ll_prop = loglik(r0, bt_prop, alpha_inv, eta_prop, sg2)
            if np.isfinite(ll_prop):
                la = inv_delta * (ll_prop - ll) + la_extra
                if _accept(la, draws["u_r0c"]):
                    bt, eta, ll = bt_prop, eta_prop, ll_prop
                    accepts["path_level"] = True

    # block 2: beta_tilde sites
    m = X @ mu
    v = sb2 * (1.0 - rho**2)
    for t in range(T + 1):
        prop = bt[t] + scales.beta_site * draws["z_bt"][t]
        old = bt[t]
        dp = 0.0
        if t == 0:
            dn, do = prop - m[0], old - m[0]
            dp += -0.5 * (dn**2 - do**2) / sb2
            if T >= 1:
                en = (bt[1] - m[1]) - rho * dn
                eo = (bt[1] - m[1]) - rho * do
                dp += -0.5 * (en**2 - eo**2) / v
        else:
            prev = bt[t - 1] - m[t - 1]
            en = (prop - m[t]) - rho * prev
            eo = (old - m[t]) - rho * prev
            dp += -0.5 * (en**2 - eo**2) / v
            if t < T:
                nxt = bt[t + 1] - m[t + 1]
                fn = nxt - rho * (prop - m[t])
                fo = nxt - rho * (old - m[t])
                dp += -0.5 * (fn**2 - fo**2) / v
        bt_prop = bt.copy()
        bt_prop[t] = prop
        ll_prop = loglik(r0, bt_prop, alpha_inv, eta, sg2)
        if not np.isfinite(ll_prop):
            continue
        la = dp + inv_delta * (ll_prop - ll)
        if _accept(la, draws["u_bt"][t]):
            bt, ll = bt_prop, ll_prop
            accepts["beta_tilde"][t] = True

    # block 3: alpha_inv
    w_old = math.log(alpha_inv - 1.0)
    al_prop = 1.0 + math.exp(w_old + scales.alpha_inv * draws["z_al"])
    ll_prop = loglik(r0, bt, al_prop, eta, sg2)
    la = -np.inf
    if np.isfinite(ll_prop):
        la = inv_delta * (ll_prop - ll)
        la += (cfg.alpha_inv_shape - 1.0) * (math.log(al_prop) - math.log(alpha_inv))
        la -= cfg.alpha_inv_rate * (al_prop - alpha_inv)
        la += math.log(al_prop - 1.0) - w_old
    accepts["alpha_inv"] = bool(np.isfinite(ll_prop) and _accept(la, draws["u_al"]))
    if accepts["alpha_inv"]:
        alpha_inv, ll = al_prop, ll_prop

    # block 4: mu (conjugate; draw = mean + L^-T z with precision = L L')
    P, b = _mu_precision(bt, sb2, rho, cfg, X)
    L = np.linalg.cholesky(P)
    mean = np.linalg.solve(L.T, np.linalg.solve(L, b))
    mu = mean + np.linalg.solve(L.T, draws["z_mu"])
    m = X @ mu

    # block 5: sigma_beta2 (conjugate InvGa; draw = rate / Gamma(shape, 1))
    _, rate = sigma_beta2_conditional(bt, mu, rho, cfg, X)
    sb2 = rate / draws["g_sb"]

    # block 6: rho
    w_old = math.log(rho / (1.0 - rho))
    rho_prop = 1.0 / (1.0 + math.exp(-(w_old + scales.rho * draws["z_rho"])))
    accepts["rho"] = False
    if 1e-12 < rho_prop < 1.0 - 1e-12:
        la = gp_log_density(bt, GpSpec(X, mu, sb2, rho_prop))
        la -= gp_log_density(bt, GpSpec(X, mu, sb2, rho))
        la += (cfg.rho_a - 1.0) * (math.log(rho_prop) - math.log(rho))
        la += (cfg.rho_b - 1.0) * (math.log1p(-rho_prop) - math.log1p(-rho))
        la += math.log(rho_prop) + math.log1p(-rho_prop)
        la -= math.log(rho) + math.log1p(-rho)
        if _accept(la, draws["u_rho"]):
            rho = rho_prop
            accepts["rho"] = True

    # -- move 6b: innovation-preserving remap of the path under a rho walk --
    # the process-prior ratio and the triangular remap Jacobian cancel
    # exactly, so only the likelihood of the remapped path and the Beta
    # prior enter; see the compiled kernel for the same construction
    step = scales.rho * draws["z_rhob"]
    w_old = math.log(rho / (1.0 - rho))
    rho_prop = 1.0 / (1.0 + math.exp(-(w_old + step)))
    accepts["rho_path"] = False
    if step == 0.0:
        accepts["rho_path"] = True
    elif 1e-12 < rho_prop < 1.0 - 1e-12:
        kappa = math.sqrt((1.0 - rho_prop**2) / (1.0 - rho**2))
        bt_prop = bt.copy()
        for t in range(1, T + 1):
            e_t = (bt[t] - m[t]) - rho * (bt[t - 1] - m[t - 1])
            bt_prop[t] = m[t] + rho_prop * (bt_prop[t - 1] - m[t - 1]) + kappa * e_t
        ll_prop = loglik(r0, bt_prop, alpha_inv, eta, sg2)
        if np.isfinite(ll_prop):
            la = inv_delta * (ll_prop - ll)
            la += (cfg.rho_a - 1.0) * (math.log(rho_prop) - math.log(rho))
            la += (cfg.rho_b - 1.0) * (math.log1p(-rho_prop) - math.log1p(-rho))
            la += math.log(rho_prop) + math.log1p(-rho_prop)
            la -= math.log(rho) + math.log1p(-rho)
            if _accept(la, draws["u_rhob"]):
                rho, bt, ll = rho_prop, bt_prop, ll_prop
                accepts["rho_path"] = True

    # gamma_tilde under the current trajectory (needed by blocks 7-8)
    if fixed_gamma_tilde is not None:
        gt = np.asarray(fixed_gamma_tilde, float)
    else:
        params = EpidemicParams(r0 * obs.I_D0, np.exp(bt), 1.0 / alpha_inv)
        gt = model.gamma_tilde_path(params, obs, link)

    # block 7: eta (tempered conjugate)
    P, b = _eta_precision(gt, sg2, delta, cfg, Y)
    L = np.linalg.cholesky(P)
    mean = np.linalg.solve(L.T, np.linalg.solve(L, b))
    eta = mean + np.linalg.solve(L.T, draws["z_eta"])

    # block 8: sigma_gamma2 (tempered conjugate)
    _, rate = sigma_gamma2_conditional(gt, eta, delta, cfg, Y)
    sg2 = rate / draws["g_sg"]

    new = ParameterState(r0, bt, alpha_inv, mu, sb2, rho, eta, sg2)
    accepts["mu"] = accepts["sigma_beta2"] = accepts["eta"] = accepts["sigma_gamma2"] = True
    return new, accepts


def pt_swap_log_accept(ll_j: float, ll_j1: float, delta_j: float, delta_j1: float) -> float:
    """Log acceptance of swapping adjacent states: (1/D_j - 1/D_{j+1})(L_{j+1} - L_j)."""
    return (1.0 / delta_j - 1.0 / delta_j1) * (ll_j1 - ll_j)


def pt_swap(
    theta_j: ParameterState,
    theta_j1: ParameterState,
    delta_j: float,
    delta_j1: float,
    obs: Observations,
    prior_cfg: PriorConfig,
    rng: np.random.Generator,
    Y: np.ndarray | None = None,
    fixed_gamma_tilde: np.ndarray | None = None,
) -> tuple[ParameterState, ParameterState, bool]:
    """Propose exchanging states between adjacent chains; Delta_j > Delta_{j+1}."""
    if not delta_j > delta_j1:
        raise ConfigError("swap requires delta_j > delta_j1")
    ll_j = state_log_likelihood(theta_j, obs, prior_cfg.link, Y, fixed_gamma_tilde)
    ll_j1 = state_log_likelihood(theta_j1, obs, prior_cfg.link, Y, fixed_gamma_tilde)
    la = pt_swap_log_accept(ll_j, ll_j1, delta_j, delta_j1)
    if _accept(la, float(rng.random())):
        return theta_j1, theta_j, True
    return theta_j, theta_j1, False


# ---------------------------------------------------------------------------
# production driver


def _init_state(
    rng: np.random.Generator, cfg: PriorConfig, X: np.ndarray, q: int
) -> ParameterState:
    """Prior draw with beta_tilde started flat at the drawn intercept.

    Scalar parameters come from their priors. The trend coefficients of mu
    are started at their prior mean instead of drawn: a raw draw of the time
    slope makes exp(X mu) explode or collapse over an 80-day window and
    almost never yields a feasible trajectory. beta_tilde starts at X mu.
    """
    r0 = float(rng.gamma(cfg.i_u0_ratio_shape, 1.0 / cfg.i_u0_ratio_rate))
    alpha_inv = priors.trunc_gamma_rvs(cfg.alpha_inv_shape, cfg.alpha_inv_rate, rng)
    Lmu = np.linalg.cholesky(cfg.mu_cov)
    mu = cfg.mu_mean + Lmu @ rng.standard_normal(len(cfg.mu_mean))
    mu[1:] = cfg.mu_mean[1:]
    sb2 = float(cfg.sigma_beta2_rate / rng.standard_gamma(cfg.sigma_beta2_shape))
    rho = float(rng.beta(cfg.rho_a, cfg.rho_b))
    Leta = np.linalg.cholesky(cfg.eta_cov)
    eta = cfg.eta_mean + Leta @ rng.standard_normal(q)
    sg2 = float(cfg.sigma_gamma2_rate / rng.standard_gamma(cfg.sigma_gamma2_shape))
    rho = min(max(rho, 1e-6), 1.0 - 1e-6)
    return ParameterState(r0, X @ mu, alpha_inv, mu, sb2, rho, eta, sg2)


def run_sampler(
    obs: Observations,
    prior_cfg: PriorConfig,
    sampler_cfg: SamplerConfig,
    gp_design: np.ndarray | None = None,
    Y: np.ndarray | None = None,
    fixed_gamma_tilde: np.ndarray | None = None,
    initial_states: list[ParameterState] | None = None,
    quiet: bool = True,
) -> PosteriorDraws:
    """Run the parallel-tempering sampler and keep thinned cold-chain draws.

    Chains are initialized from the priors (up to `max_init_tries` attempts
    each until the tempered target is finite) unless `initial_states` warm
    starts them. Each chain owns an RNG stream keyed to (seed, chain index)
    and the swap step a stream keyed to (seed, 2**31 - 1), so results do not
    depend on scheduling or thread count.
    """
    T = obs.T
    X = np.atleast_2d(gp_design) if gp_design is not None else default_design(T)
    X = np.ascontiguousarray(X, dtype=float)
    if X.shape[0] != T + 1:
        raise ConfigError("design matrix must have T+1 rows")
    p = X.shape[1]
    q = len(prior_cfg.eta_mean)
    if Y is None:
        Y = np.ones((T + 1, q))
    Y = np.ascontiguousarray(np.atleast_2d(Y), dtype=float)
    if Y.shape != (T + 1, q):
        raise ConfigError("covariate matrix must be (T+1) x dim(eta)")
    ladder = sampler_cfg.resolved_ladder()
    deltas = ladder.deltas
    J = len(deltas)
    seed = sampler_cfg.rng_seed

    use_fixed = fixed_gamma_tilde is not None
    fixed_gt = (
        np.asarray(fixed_gamma_tilde, float) if use_fixed else np.zeros(T + 1)
    )
    if use_fixed and len(fixed_gt) != T + 1:
        raise ConfigError("fixed gamma_tilde must have length T+1")

    rngs = [np.random.default_rng([seed, j]) for j in range(J)]
    swap_rng = np.random.default_rng([seed, 2**31 - 1])

    # initialization: prior draws until the tempered target is finite
    if initial_states is not None:
        if len(initial_states) != J:
            raise ConfigError("need one initial state per chain")
        states = list(initial_states)
        for j, cand in enumerate(states):
            lt = tempered_log_target(cand, deltas[j], obs, prior_cfg, X, Y, fixed_gamma_tilde)
            if not np.isfinite(lt):
                raise ConfigError(f"chain {j}: provided initial state has -inf target")
    else:
        states = []
        for j in range(J):
            ok = False
            for _ in range(sampler_cfg.max_init_tries):
                cand = _init_state(rngs[j], prior_cfg, X, q)
                lt = tempered_log_target(
                    cand, deltas[j], obs, prior_cfg, X, Y, fixed_gamma_tilde
                )
                if np.isfinite(lt):
                    states.append(cand)
                    ok = True
                    break
            if not ok:
                raise ConfigError(
                    f"chain {j}: no finite starting point in "
                    f"{sampler_cfg.max_init_tries} prior draws"
                )

    # pack state into kernel arrays
    r0 = np.array([s.r0 for s in states])
    bt = np.stack([s.beta_tilde for s in states])
    beta_cur = np.exp(bt)
    alpha_inv = np.array([s.alpha_inv for s in states])
    mu = np.stack([s.mu for s in states])
    sb2 = np.array([s.sigma_beta2 for s in states])
    rho = np.array([s.rho for s in states])
    eta = np.stack([s.eta for s in states])
    sg2 = np.array([s.sigma_gamma2 for s in states])

    n1 = T + 1
    S = np.zeros((J, n1))
    IU = np.zeros((J, n1))
    ID = np.zeros((J, n1))
    RR = np.zeros((J, n1))
    gt = np.zeros((J, n1))
    llt = np.zeros((J, n1))
    eta_lin = eta @ Y.T  # (J, T+1)
    ll = np.zeros(J)
    link_kind = _kernels.LINK_CODES[prior_cfg.link.value]
    N = obs.population.N
    Bv = np.ascontiguousarray(obs.B, dtype=float)
    for j in range(J):
        feasible, tot = _kernels._full_loglik(
            r0[j], beta_cur[j], 1.0 / alpha_inv[j], Bv, N, obs.I_D0, link_kind,
            eta_lin[j], sg2[j], S[j], IU[j], ID[j], RR[j], gt[j], llt[j],
            T, use_fixed, fixed_gt,
        )
        if not feasible:
            raise ConfigError(f"chain {j}: initialization no longer feasible")
        ll[j] = tot

    scratch = [np.zeros((J, n1)) for _ in range(8)]
    S2, IU2, ID2, R2, gt2, llt2, elin2, btp = scratch
    ridge_r0 = bool(np.all(Y[:, 0] == 1.0))

    sc = sampler_cfg.scales
    sc_r0 = np.full(J, sc.r0)
    sc_r0b = np.full(J, sc.remap_scale())
    sc_r0c = np.full(J, sc.remap_scale())
    sc_bt = np.full((J, n1), sc.beta_site)
    sc_al = np.full(J, sc.alpha_inv)
    sc_rho = np.full(J, sc.rho)
    sc_rhob = np.full(J, sc.rho)
    accw_r0 = np.zeros(J)
    accw_r0b = np.zeros(J)
    accw_r0c = np.zeros(J)
    accw_bt = np.zeros((J, n1))
    accw_al = np.zeros(J)
    accw_rho = np.zeros(J)
    accw_rhob = np.zeros(J)
    accT_r0 = np.zeros(J, dtype=np.int64)
    accT_r0b = np.zeros(J, dtype=np.int64)
    accT_r0c = np.zeros(J, dtype=np.int64)
    accT_bt = np.zeros(J, dtype=np.int64)
    accT_al = np.zeros(J, dtype=np.int64)
    accT_rho = np.zeros(J, dtype=np.int64)
    accT_rhob = np.zeros(J, dtype=np.int64)
    swap_acc = np.zeros(max(J - 1, 1), dtype=np.int64)[: J - 1]
    swap_att = np.zeros(max(J - 1, 1), dtype=np.int64)[: J - 1]

    n_rec = sampler_cfg.n_draws
    rec_r0 = np.zeros(n_rec)
    rec_bt = np.zeros((n_rec, n1))
    rec_alinv = np.zeros(n_rec)
    rec_mu = np.zeros((n_rec, p))
    rec_sb2 = np.zeros(n_rec)
    rec_rho = np.zeros(n_rec)
    rec_eta = np.zeros((n_rec, q))
    rec_sg2 = np.zeros(n_rec)
    rec_ll = np.zeros(n_rec)
    rec_pos = np.zeros(1, dtype=np.int64)

    pq = max(p, q)
    mwork = np.zeros((J, max(n1, pq)))
    pwork1 = np.zeros((J, pq))
    pwork2 = np.zeros((J, pq))
    pmat = np.zeros((J, pq, pq))
    pmatL = np.zeros((J, pq, pq))

    Pmu = np.linalg.inv(prior_cfg.mu_cov)
    Pmu_m = Pmu @ prior_cfg.mu_mean
    Peta = np.linalg.inv(prior_cfg.eta_cov)
    Peta_m = Peta @ prior_cfg.eta_mean
    YtY = Y.T @ Y
    a_sb_post = prior_cfg.sigma_beta2_shape + 0.5 * n1
    a_sg_post = prior_cfg.sigma_gamma2_shape + 0.5 * n1 / deltas

    block = 500
    it_done = 0
    while it_done < sampler_cfg.n_iter:
        K = min(block, sampler_cfg.n_iter - it_done)
        zn_r0 = np.empty((J, K))
        un_r0 = np.empty((J, K))
        zn_r0b = np.empty((J, K))
        un_r0b = np.empty((J, K))
        zn_rhob = np.empty((J, K))
        un_rhob = np.empty((J, K))
        zn_r0c = np.empty((J, K))
        un_r0c = np.empty((J, K))
        zn_bt = np.empty((J, K, n1))
        un_bt = np.empty((J, K, n1))
        zn_al = np.empty((J, K))
        un_al = np.empty((J, K))
        zn_mu = np.empty((J, K, p))
        g_sb = np.empty((J, K))
        zn_rho = np.empty((J, K))
        un_rho = np.empty((J, K))
        zn_eta = np.empty((J, K, q))
        g_sg = np.empty((J, K))
        for j in range(J):
            g = rngs[j]
            zn_r0[j] = g.standard_normal(K)
            un_r0[j] = g.random(K)
            zn_bt[j] = g.standard_normal((K, n1))
            un_bt[j] = g.random((K, n1))
            zn_al[j] = g.standard_normal(K)
            un_al[j] = g.random(K)
            zn_mu[j] = g.standard_normal((K, p))
            g_sb[j] = g.standard_gamma(a_sb_post, K)
            zn_rho[j] = g.standard_normal(K)
            un_rho[j] = g.random(K)
            zn_eta[j] = g.standard_normal((K, q))
            g_sg[j] = g.standard_gamma(a_sg_post[j], K)
            zn_r0b[j] = g.standard_normal(K)
            un_r0b[j] = g.random(K)
            zn_rhob[j] = g.standard_normal(K)
            un_rhob[j] = g.random(K)
            zn_r0c[j] = g.standard_normal(K)
            un_r0c[j] = g.random(K)
        un_swap = swap_rng.random((K, max(J - 1, 0)))

        _kernels.run_block(
            it_done, K, sampler_cfg.burn_in, sampler_cfg.thin,
            sampler_cfg.adapt_window, sampler_cfg.adapt, sampler_cfg.swap_every,
            Bv, N, obs.I_D0, X, Y, YtY, link_kind, T, p, q,
            prior_cfg.i_u0_ratio_shape, prior_cfg.i_u0_ratio_rate,
            a_sb_post, prior_cfg.sigma_beta2_rate,
            prior_cfg.rho_a, prior_cfg.rho_b,
            prior_cfg.alpha_inv_shape, prior_cfg.alpha_inv_rate,
            Pmu, Pmu_m, Peta, Peta_m, prior_cfg.sigma_gamma2_rate,
            deltas, ridge_r0,
            r0, bt, beta_cur, alpha_inv, mu, sb2, rho, eta, sg2,
            S, IU, ID, RR, gt, llt, eta_lin, ll,
            S2, IU2, ID2, R2, gt2, llt2, elin2, btp,
            sc_r0, sc_r0b, sc_r0c, sc_bt, sc_al, sc_rho, sc_rhob,
            accw_r0, accw_r0b, accw_r0c, accw_bt, accw_al, accw_rho, accw_rhob,
            accT_r0, accT_r0b, accT_r0c, accT_bt, accT_al, accT_rho, accT_rhob,
            zn_r0, un_r0, zn_r0b, un_r0b, zn_r0c, un_r0c, zn_bt, un_bt, zn_al, un_al, zn_mu, g_sb,
            zn_rho, un_rho, zn_rhob, un_rhob, zn_eta, g_sg, un_swap,
            swap_acc, swap_att,
            rec_r0, rec_bt, rec_alinv, rec_mu, rec_sb2, rec_rho, rec_eta,
            rec_sg2, rec_ll, rec_pos,
            mwork, pwork1, pwork2, pmat, pmatL,
            use_fixed, fixed_gt,
        )
        it_done += K
        if not quiet:
            print(f"  sampler: {it_done}/{sampler_cfg.n_iter} iterations")

    if rec_pos[0] != n_rec:
        raise RuntimeError(f"recorded {rec_pos[0]} draws, expected {n_rec}")

    n_post = sampler_cfg.n_iter - sampler_cfg.burn_in
    accept_rates = {
        "r0": accT_r0 / n_post,
        "r0_ridge": accT_r0b / n_post,
        "path_level": accT_r0c / n_post,
        "beta_tilde": accT_bt / (n_post * n1),
        "alpha_inv": accT_al / n_post,
        "rho": accT_rho / n_post,
        "rho_path": accT_rhob / n_post,
    }
    swap_rates = np.divide(
        swap_acc, np.maximum(swap_att, 1), out=np.zeros(max(J - 1, 0)), where=swap_att > 0
    )

    final_states = [
        ParameterState(
            float(r0[j]), bt[j].copy(), float(alpha_inv[j]), mu[j].copy(),
            float(sb2[j]), float(rho[j]), eta[j].copy(), float(sg2[j]),
        )
        for j in range(J)
    ]
    draws = PosteriorDraws(
        r0=rec_r0,
        beta_tilde=rec_bt,
        alpha_inv=rec_alinv,
        mu=rec_mu,
        sigma_beta2=rec_sb2,
        rho=rec_rho,
        eta=rec_eta,
        sigma_gamma2=rec_sg2,
        accept_rates=accept_rates,
        swap_accept_rates=swap_rates,
        log_lik=rec_ll,
        final_states=final_states,
        final_scales={
            "r0": sc_r0.copy(),
            "r0_ridge": sc_r0b.copy(),
            "path_level": sc_r0c.copy(),
            "beta_tilde": sc_bt.copy(),
            "alpha_inv": sc_al.copy(),
            "rho": sc_rho.copy(),
            "rho_path": sc_rhob.copy(),
        },
    )
    if not use_fixed:
        draws.re_paths = draws.compute_re_paths(obs)
    return draws
