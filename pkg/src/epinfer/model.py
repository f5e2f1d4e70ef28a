"""Compartmental state types, deterministic propagation, reproduction numbers,
link functions, and the confirmed-case likelihood.

The epidemic process splits infectious individuals into undocumented (I_U) and
documented (I_D) pools. Daily new confirmed counts B_t move people from I_U to
I_D; both pools are removed at rate alpha. Transmission is driven by a per-day
rate beta_t acting on the full infectious pool.
"""

from __future__ import annotations

import datetime
import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit, ndtr, ndtri

MASS_TOL = 1e-6  # relative tolerance on S + I_U + I_D + R = N

__all__ = [
    "MASS_TOL",
    "Population",
    "CompartmentState",
    "Trajectory",
    "Observations",
    "EpidemicParams",
    "LinkFunction",
    "DomainError",
    "InfeasibleTrajectory",
    "initial_state",
    "propagate",
    "reproduction_numbers",
    "diagnosis_rates",
    "link_forward",
    "link_inverse",
    "log_likelihood",
    "gamma_tilde_path",
]


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class InfeasibleTrajectory(ValueError):
    """A compartment went negative during propagation.

    Signals parameter values incompatible with the observed counts; samplers
    treat this as log-likelihood -inf rather than an error.
    """

    def __init__(self, t: int, compartment: str, value: float):
        self.t = t
        self.compartment = compartment
        self.value = value
        super().__init__(f"compartment {compartment} = {value:.6g} < 0 at t={t}")


@dataclass(frozen=True)
class Population:
    """Closed population size, fixed over the analysis window."""

    N: float

    def __post_init__(self):
        if not self.N > 0:
            raise ValueError(f"population must be positive, got {self.N}")


@dataclass(frozen=True)
class CompartmentState:
    """One day's compartment occupancy (S, I_U, I_D, R), real-valued."""

    S: float
    I_U: float
    I_D: float
    R: float

    def total(self) -> float:
        return self.S + self.I_U + self.I_D + self.R

    def validate(self, population: Population) -> None:
        for name in ("S", "I_U", "I_D", "R"):
            v = getattr(self, name)
            if v < 0:
                raise ValueError(f"{name} = {v} is negative")
        if abs(self.total() - population.N) > MASS_TOL * population.N:
            raise ValueError(
                f"mass not conserved: total {self.total()} vs N {population.N}"
            )


@dataclass(frozen=True)
class Trajectory:
    """Compartment paths for t = 0..T, stored as parallel arrays."""

    S: np.ndarray
    I_U: np.ndarray
    I_D: np.ndarray
    R: np.ndarray
    population: Population

    def __len__(self) -> int:
        return len(self.S)

    @property
    def T(self) -> int:
        return len(self.S) - 1

    def state(self, t: int) -> CompartmentState:
        return CompartmentState(
            float(self.S[t]), float(self.I_U[t]), float(self.I_D[t]), float(self.R[t])
        )

    def mass_error(self) -> float:
        """Max absolute deviation of S+I_U+I_D+R from N across all days."""
        total = self.S + self.I_U + self.I_D + self.R
        return float(np.max(np.abs(total - self.population.N)))

    def validate(self) -> None:
        for name in ("S", "I_U", "I_D", "R"):
            arr = getattr(self, name)
            if np.any(arr < 0):
                t = int(np.argmax(arr < 0))
                raise ValueError(f"{name} negative at t={t}")
        if self.mass_error() > MASS_TOL * self.population.N:
            raise ValueError("mass not conserved along trajectory")


@dataclass(frozen=True)
class Observations:
    """Daily new confirmed cases plus the day-0 anchor.

    B has length T+1. I_D0 is the cumulative confirmed count on day 0 (the
    first day with at least 100 cumulative cases when built from real data).
    """

    B: np.ndarray
    I_D0: float
    population: Population
    day0_date: datetime.date
    region: str = ""

    def __post_init__(self):
        object.__setattr__(self, "B", np.asarray(self.B, dtype=float))
        if np.any(self.B < 0):
            raise ValueError("daily counts must be non-negative")
        if not self.I_D0 > 0:
            raise ValueError("I_D0 must be positive")

    @property
    def T(self) -> int:
        return len(self.B) - 1

    def date(self, t: int) -> datetime.date:
        return self.day0_date + datetime.timedelta(days=int(t))


@dataclass(frozen=True)
class EpidemicParams:
    """Process parameters: initial undocumented count, per-day transmission
    rates beta_0..beta_T, and the removal rate alpha.

    alpha = 0 (no removal) is admitted for degenerate studies; alpha = 1
    is not, since it empties the undocumented pool the diagnosis rate
    divides by.
    """

    I_U0: float
    beta: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if not self.I_U0 > 0:
            raise ValueError("I_U0 must be positive")
        if not 0 <= self.alpha < 1:
            raise ValueError(f"alpha must be in [0,1), got {self.alpha}")
        if np.any(self.beta < 0):
            raise ValueError("all beta_t must be non-negative")

    @property
    def T(self) -> int:
        return len(self.beta) - 1


class LinkFunction(enum.Enum):
    """Strictly increasing bijections (0,1) -> R for the diagnosis rate."""

    LOGIT = "logit"
    PROBIT = "probit"
    CLOGLOG = "cloglog"

    @classmethod
    def from_name(cls, name: str) -> "LinkFunction":
        try:
            return cls(name.lower())
        except ValueError:
            raise DomainError(f"unknown link function {name!r}") from None


def link_forward(p, link: LinkFunction):
    """Map a diagnosis rate in (0,1) to the unconstrained scale."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0) or np.any(p >= 1):
        raise DomainError("link_forward requires p in the open interval (0,1)")
    if link is LinkFunction.LOGIT:
        out = logit(p)
    elif link is LinkFunction.PROBIT:
        out = ndtri(p)
    else:
        out = np.log(-np.log1p(-p))
    return float(out) if out.ndim == 0 else out


def link_inverse(x, link: LinkFunction):
    """Inverse of :func:`link_forward`; maps R back into (0,1)."""
    x = np.asarray(x, dtype=float)
    if link is LinkFunction.LOGIT:
        out = expit(x)
    elif link is LinkFunction.PROBIT:
        out = ndtr(x)
    else:
        out = -np.expm1(-np.exp(x))
    return float(out) if out.ndim == 0 else out


def initial_state(I_U0: float, I_D0: float, population: Population) -> CompartmentState:
    """Day-0 state with no removed individuals: S_0 = N - I_U0 - I_D0."""
    S0 = population.N - I_U0 - I_D0
    return CompartmentState(S0, I_U0, I_D0, 0.0)


def propagate(
    v0: CompartmentState,
    params: EpidemicParams,
    B: np.ndarray,
    population: Population,
) -> Trajectory:
    """Run the deterministic recursion from v0 for t = 1..T.

    One step moves beta_t*S_t*(I_U_t+I_D_t)/N people from S into I_U, removes
    a fraction alpha from both infectious pools into R, and transfers the
    observed B_t from I_U to I_D. T is set by len(params.beta) - 1; B must
    supply at least B_0..B_{T-1}.

    Raises InfeasibleTrajectory as soon as any compartment goes negative.
    """
    B = np.asarray(B, dtype=float)
    T = params.T
    if len(B) < T:
        raise ValueError(f"need at least {T} observations, got {len(B)}")
    N = population.N
    alpha = params.alpha
    beta = params.beta

    S = np.empty(T + 1)
    I_U = np.empty(T + 1)
    I_D = np.empty(T + 1)
    R = np.empty(T + 1)
    S[0], I_U[0], I_D[0], R[0] = v0.S, v0.I_U, v0.I_D, v0.R
    v0.validate(population)

    for t in range(T):
        new_inf = beta[t] * S[t] * (I_U[t] + I_D[t]) / N
        S[t + 1] = S[t] - new_inf
        I_U[t + 1] = (1.0 - alpha) * I_U[t] + new_inf - B[t]
        I_D[t + 1] = (1.0 - alpha) * I_D[t] + B[t]
        R[t + 1] = R[t] + alpha * (I_U[t] + I_D[t])
        for name, arr in (("S", S), ("I_U", I_U), ("I_D", I_D), ("R", R)):
            if arr[t + 1] < 0:
                raise InfeasibleTrajectory(t + 1, name, float(arr[t + 1]))

    return Trajectory(S, I_U, I_D, R, population)


def reproduction_numbers(
    traj: Trajectory, params: EpidemicParams, population: Population
) -> tuple[np.ndarray, np.ndarray]:
    """Per-day basic and effective reproduction numbers.

    R0_t = beta_t / alpha and Re_t = beta_t * S_t / (alpha * N); Re_t <= R0_t
    always since S_t <= N.
    """
    if len(params.beta) != len(traj):
        raise ValueError("params and trajectory lengths differ")
    r0 = params.beta / params.alpha
    re = params.beta * traj.S / (params.alpha * population.N)
    return r0, re


def diagnosis_rates(
    traj: Trajectory, params: EpidemicParams, B: np.ndarray
) -> np.ndarray:
    """Implied diagnosis rates gamma_t = B_t / ((1-alpha) I_U_t) for t = 0..T.

    Values outside (0,1) mean the parameters cannot have produced B; callers
    decide whether that is an error or a -inf likelihood.
    """
    B = np.asarray(B, dtype=float)
    if len(B) != len(traj):
        raise ValueError("observation and trajectory lengths differ")
    denom = (1.0 - params.alpha) * traj.I_U
    with np.errstate(divide="ignore", invalid="ignore"):
        return B / denom


def log_likelihood(
    params: EpidemicParams,
    eta: np.ndarray,
    sigma_gamma2: float,
    obs: Observations,
    link: LinkFunction,
    y: np.ndarray | None = None,
) -> float:
    """Log-likelihood of the daily counts under the diagnosis-rate model.

    Propagates the trajectory, forms gamma_t = B_t/((1-alpha) I_U_t), maps it
    through the link, and sums normal log-densities of the transformed rates
    around y_t' eta with variance sigma_gamma2. The density is taken on the
    transformed scale exactly as stated by the model; no change-of-variables
    term is added.

    Returns -inf (never raises) when the trajectory is infeasible or any
    gamma_t falls outside (0,1).
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    T = obs.T
    if params.T != T:
        raise ValueError("params.beta and obs.B must both have length T+1")
    if y is None:
        y = np.ones((T + 1, len(eta)))
    y = np.asarray(y, dtype=float)
    if not sigma_gamma2 > 0:
        return -np.inf

    v0 = initial_state(params.I_U0, obs.I_D0, obs.population)
    if v0.S < 0:
        return -np.inf
    try:
        traj = propagate(v0, params, obs.B, obs.population)
    except InfeasibleTrajectory:
        return -np.inf

    gamma = diagnosis_rates(traj, params, obs.B)
    if np.any(~np.isfinite(gamma)) or np.any(gamma <= 0) or np.any(gamma >= 1):
        return -np.inf
    gamma_tilde = link_forward(gamma, link)
    mean = y @ eta
    resid = gamma_tilde - mean
    n = T + 1
    return float(
        -0.5 * n * np.log(2.0 * np.pi * sigma_gamma2)
        - 0.5 * np.sum(resid**2) / sigma_gamma2
    )


def gamma_tilde_path(
    params: EpidemicParams, obs: Observations, link: LinkFunction
) -> np.ndarray:
    """Transformed diagnosis-rate path for feasible parameters.

    Raises InfeasibleTrajectory / DomainError when the parameters cannot have
    produced the observations (used by diagnostics, which skip such draws).
    """
    v0 = initial_state(params.I_U0, obs.I_D0, obs.population)
    traj = propagate(v0, params, obs.B, obs.population)
    gamma = diagnosis_rates(traj, params, obs.B)
    if np.any(~np.isfinite(gamma)) or np.any(gamma <= 0) or np.any(gamma >= 1):
        raise DomainError("diagnosis rate outside (0,1)")
    return link_forward(gamma, link)
