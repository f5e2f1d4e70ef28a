"""Gaussian-process prior on the log transmission rate.

The prior puts a linear mean x_t' mu and a power-decay covariance
sigma_beta2 * rho^|t-t'| on beta_tilde(t) = log beta_t. That covariance makes
the process an exact first-order autoregression, so densities and
conditionals are computed in O(T) instead of O(T^3); the dense matrix route
is kept available for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GpSpec",
    "GpConditional",
    "FactorizationError",
    "default_design",
    "gp_log_density",
    "dense_covariance",
    "gp_conditional",
    "gp_conditional_dense",
    "gp_sample_conditional",
]

LOG_2PI = np.log(2.0 * np.pi)


class FactorizationError(RuntimeError):
    """Covariance factorization failed even after diagonal perturbation."""


def default_design(T: int, t0: int = 0) -> np.ndarray:
    """Design matrix with intercept and time columns, rows t = t0..t0+T."""
    t = np.arange(t0, t0 + T + 1, dtype=float)
    return np.column_stack([np.ones_like(t), t])


@dataclass(frozen=True)
class GpSpec:
    """Mean design, coefficients, and power-decay kernel parameters."""

    X: np.ndarray
    mu: np.ndarray
    sigma_beta2: float
    rho: float

    def __post_init__(self):
        object.__setattr__(self, "X", np.atleast_2d(np.asarray(self.X, dtype=float)))
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, dtype=float)))
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must be in (0,1), got {self.rho}")
        if not self.sigma_beta2 > 0:
            raise ValueError(f"sigma_beta2 must be positive, got {self.sigma_beta2}")
        if self.X.shape[1] != len(self.mu):
            raise ValueError("design and coefficient dimensions differ")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def mean(self) -> np.ndarray:
        return self.X @ self.mu


@dataclass(frozen=True)
class GpConditional:
    """Conditional (predictive) normal law for future process values."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        object.__setattr__(
            self, "covariance", np.atleast_2d(np.asarray(self.covariance, dtype=float))
        )
        cov = self.covariance
        if cov.shape != (len(self.mean), len(self.mean)):
            raise ValueError("covariance shape does not match mean length")
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise ValueError("covariance must be symmetric")
        if len(self.mean) <= 32:  # eigenvalue check only at small sizes
            if np.min(np.linalg.eigvalsh(cov)) < -1e-10:
                raise ValueError("covariance is not numerically PSD")


def gp_log_density(beta_tilde: np.ndarray, spec: GpSpec) -> float:
    """Multivariate-normal log density at beta_tilde, via the AR(1) factorization.

    beta_tilde_0 ~ N(m(0), sigma_beta2) and, for t >= 1,
    beta_tilde_t | beta_tilde_{t-1} ~ N(m(t) + rho*(beta_tilde_{t-1} - m(t-1)),
    sigma_beta2*(1-rho^2)). Equals the dense N(X mu, C) density.
    """
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    if len(beta_tilde) != spec.n:
        raise ValueError("beta_tilde length does not match design rows")
    m = spec.mean()
    d = beta_tilde - m
    s2 = spec.sigma_beta2
    v = s2 * (1.0 - spec.rho**2)
    ll = -0.5 * (LOG_2PI + np.log(s2)) - 0.5 * d[0] ** 2 / s2
    if spec.n > 1:
        innov = d[1:] - spec.rho * d[:-1]
        n1 = spec.n - 1
        ll += -0.5 * n1 * (LOG_2PI + np.log(v)) - 0.5 * np.sum(innov**2) / v
    return float(ll)


def dense_covariance(spec: GpSpec, rows: np.ndarray | None = None, cols: np.ndarray | None = None) -> np.ndarray:
    """Kernel matrix sigma_beta2 * rho^|t - t'| over the given index sets.

    Defaults to the training indices 0..n-1 on both axes.
    """
    if rows is None:
        rows = np.arange(spec.n)
    if cols is None:
        cols = np.arange(spec.n)
    rows = np.asarray(rows, dtype=float)
    cols = np.asarray(cols, dtype=float)
    return spec.sigma_beta2 * spec.rho ** np.abs(rows[:, None] - cols[None, :])


def gp_conditional(
    beta_tilde: np.ndarray,
    spec: GpSpec,
    X_star: np.ndarray,
    horizon: int | None = None,
) -> GpConditional:
    """Conditional law of the next `horizon` values given the observed path.

    With the power kernel the process is Markov, so the exact conditional
    collapses to AR(1) extrapolation from the last value:
        mean_h  = m(T+h) + rho^h * (beta_tilde_T - m(T))
        cov_hk  = sigma_beta2 * (rho^|h-k| - rho^(h+k))
    which coincides with the dense formula
        X* mu + C* C^{-1} (beta_tilde - X mu),  C** - C* C^{-1} C*'.
    """
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    T_star = X_star.shape[0]
    if horizon is None:
        horizon = T_star
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if horizon != T_star:
        raise ValueError("X_star must have exactly `horizon` rows")
    if len(beta_tilde) != spec.n:
        raise ValueError("beta_tilde length does not match design rows")

    m_T = float(spec.X[-1] @ spec.mu)
    h = np.arange(1, T_star + 1, dtype=float)
    mean = X_star @ spec.mu + spec.rho**h * (beta_tilde[-1] - m_T)
    cov = spec.sigma_beta2 * (
        spec.rho ** np.abs(h[:, None] - h[None, :]) - spec.rho ** (h[:, None] + h[None, :])
    )
    return GpConditional(mean, cov)


def gp_conditional_dense(
    beta_tilde: np.ndarray, spec: GpSpec, X_star: np.ndarray
) -> GpConditional:
    """Conditional law via the full matrix formula (O(T^3) reference route)."""
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    T_star = X_star.shape[0]
    n = spec.n
    train = np.arange(n)
    future = np.arange(n, n + T_star)
    C = dense_covariance(spec, train, train)
    C_star = dense_covariance(spec, future, train)
    C_ss = dense_covariance(spec, future, future)
    resid = beta_tilde - spec.mean()
    solve = np.linalg.solve(C, np.column_stack([resid, C_star.T]))
    mean = X_star @ spec.mu + C_star @ solve[:, 0]
    cov = C_ss - C_star @ solve[:, 1:]
    cov = 0.5 * (cov + cov.T)
    return GpConditional(mean, cov)


def gp_sample_conditional(cond: GpConditional, rng: np.random.Generator) -> np.ndarray:
    """One draw from N(cond.mean, cond.covariance).

    A covariance of exactly zero returns the mean. Otherwise a Cholesky factor
    is used; on failure the diagonal is perturbed by 1e-10 once before giving
    up with FactorizationError.
    """
    cov = cond.covariance
    if not np.any(cov):
        return cond.mean.copy()
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        try:
            L = np.linalg.cholesky(cov + 1e-10 * np.eye(len(cond.mean)))
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(
                "conditional covariance not factorizable even after perturbation"
            ) from exc
    return cond.mean + L @ rng.standard_normal(len(cond.mean))
