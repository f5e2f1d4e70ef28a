"""Prior configuration, density evaluation, and the sensitivity presets.

Hyperparameters follow the defaults used throughout: Ga(5,1) on the ratio
I_U0/I_D0, N((-1.31,0)', diag(0.09,1)) on the trend coefficients,
Inv-Ga(11,1) on sigma_beta2, Beta(4,1) on rho, a truncated Ga(325.5,35) on
the mean infectious period alpha^{-1} (support [1, inf)), N(0,1) on eta, and
Inv-Ga(1,1) on sigma_gamma2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaincc, gammaln

from . import gp as gp_mod
from .model import LinkFunction

__all__ = [
    "PriorConfig",
    "default_prior_config",
    "sensitivity_presets",
    "preset_by_name",
    "PRESET_NAMES",
    "log_prior",
    "trunc_gamma_logpdf",
    "trunc_gamma_rvs",
    "save_prior_config",
    "load_prior_config",
]


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters for every prior block plus the link choice."""

    i_u0_ratio_shape: float = 5.0
    i_u0_ratio_rate: float = 1.0
    mu_mean: np.ndarray = field(default_factory=lambda: np.array([-1.31, 0.0]))
    mu_cov: np.ndarray = field(default_factory=lambda: np.diag([0.09, 1.0]))
    sigma_beta2_shape: float = 11.0
    sigma_beta2_rate: float = 1.0
    rho_a: float = 4.0
    rho_b: float = 1.0
    alpha_inv_shape: float = 325.5
    alpha_inv_rate: float = 35.0
    eta_mean: np.ndarray = field(default_factory=lambda: np.array([0.0]))
    eta_cov: np.ndarray = field(default_factory=lambda: np.array([[1.0]]))
    sigma_gamma2_shape: float = 1.0
    sigma_gamma2_rate: float = 1.0
    link: LinkFunction = LinkFunction.LOGIT

    def __post_init__(self):
        object.__setattr__(self, "mu_mean", np.atleast_1d(np.asarray(self.mu_mean, float)))
        object.__setattr__(self, "mu_cov", np.atleast_2d(np.asarray(self.mu_cov, float)))
        object.__setattr__(self, "eta_mean", np.atleast_1d(np.asarray(self.eta_mean, float)))
        object.__setattr__(self, "eta_cov", np.atleast_2d(np.asarray(self.eta_cov, float)))
        for name in (
            "i_u0_ratio_shape",
            "i_u0_ratio_rate",
            "sigma_beta2_shape",
            "sigma_beta2_rate",
            "rho_a",
            "rho_b",
            "alpha_inv_shape",
            "alpha_inv_rate",
            "sigma_gamma2_shape",
            "sigma_gamma2_rate",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("mu_cov", "eta_cov"):
            cov = getattr(self, name)
            if not np.allclose(cov, cov.T):
                raise ValueError(f"{name} must be symmetric")
            if np.min(np.linalg.eigvalsh(cov)) <= 0:
                raise ValueError(f"{name} must be positive definite")

    @property
    def alpha_inv_trunc_lognorm(self) -> float:
        """Log of P(Ga(shape, rate) >= 1), the truncation normalizer."""
        return float(np.log(gammaincc(self.alpha_inv_shape, self.alpha_inv_rate)))


def default_prior_config() -> PriorConfig:
    """The standard informative configuration (logit link)."""
    return PriorConfig()


PRESET_NAMES = ("default", "probit", "cloglog", "alpha-var", "alpha-mean20")


def sensitivity_presets() -> list[PriorConfig]:
    """The four sensitivity-analysis variants of the default configuration.

    1-2 swap the link for probit / complementary log-log; 3 widens the
    alpha^{-1} prior to Ga(46.5, 5); 4 moves its center to 20 via Ga(700, 35).
    """
    base = default_prior_config()
    return [
        replace(base, link=LinkFunction.PROBIT),
        replace(base, link=LinkFunction.CLOGLOG),
        replace(base, alpha_inv_shape=46.5, alpha_inv_rate=5.0),
        replace(base, alpha_inv_shape=700.0, alpha_inv_rate=35.0),
    ]


def preset_by_name(name: str) -> PriorConfig:
    presets = dict(zip(PRESET_NAMES, [default_prior_config(), *sensitivity_presets()]))
    try:
        return presets[name]
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}"
        ) from None


def gamma_logpdf(x: float, shape: float, rate: float) -> float:
    if x <= 0:
        return -math.inf
    return float(
        shape * math.log(rate) - gammaln(shape) + (shape - 1.0) * math.log(x) - rate * x
    )


def inv_gamma_logpdf(x: float, shape: float, rate: float) -> float:
    if x <= 0:
        return -math.inf
    return float(
        shape * math.log(rate) - gammaln(shape) - (shape + 1.0) * math.log(x) - rate / x
    )


def beta_logpdf(x: float, a: float, b: float) -> float:
    if not 0 < x < 1:
        return -math.inf
    return float(
        (a - 1.0) * math.log(x)
        + (b - 1.0) * math.log1p(-x)
        + gammaln(a + b)
        - gammaln(a)
        - gammaln(b)
    )


def mvn_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    x = np.atleast_1d(np.asarray(x, float))
    d = x - mean
    L = np.linalg.cholesky(np.atleast_2d(cov))
    z = np.linalg.solve(L, d)
    return float(
        -0.5 * len(x) * np.log(2 * np.pi) - np.sum(np.log(np.diag(L))) - 0.5 * z @ z
    )


def trunc_gamma_logpdf(x: float, shape: float, rate: float, lower: float = 1.0) -> float:
    """Gamma(shape, rate) log density renormalized to [lower, inf)."""
    if x < lower:
        return -math.inf
    log_tail = float(np.log(gammaincc(shape, rate * lower)))
    return gamma_logpdf(x, shape, rate) - log_tail


def trunc_gamma_rvs(
    shape: float, rate: float, rng: np.random.Generator, lower: float = 1.0
) -> float:
    """Rejection draw from the truncated gamma (tail mass is ~1 here)."""
    for _ in range(10000):
        x = rng.gamma(shape, 1.0 / rate)
        if x >= lower:
            return float(x)
    raise RuntimeError("truncated gamma rejection sampler failed (tail mass too small)")


def log_prior(
    r0: float,
    beta_tilde: np.ndarray,
    alpha_inv: float,
    mu: np.ndarray,
    sigma_beta2: float,
    rho: float,
    eta: np.ndarray,
    sigma_gamma2: float,
    cfg: PriorConfig,
    X: np.ndarray,
    I_D0: float,
) -> float:
    """Joint log prior density of the full parameter block.

    Sums the hyperpriors, the GP density of beta_tilde given (mu, sigma_beta2,
    rho), and the constant -log(I_D0) scale Jacobian that expresses the ratio
    prior on the I_U0 scale. Returns -inf outside any support.
    """
    if r0 <= 0 or alpha_inv < 1.0 or not 0 < rho < 1 or sigma_beta2 <= 0 or sigma_gamma2 <= 0:
        return -math.inf
    lp = gamma_logpdf(r0, cfg.i_u0_ratio_shape, cfg.i_u0_ratio_rate) - math.log(I_D0)
    lp += trunc_gamma_logpdf(alpha_inv, cfg.alpha_inv_shape, cfg.alpha_inv_rate)
    lp += mvn_logpdf(mu, cfg.mu_mean, cfg.mu_cov)
    lp += inv_gamma_logpdf(sigma_beta2, cfg.sigma_beta2_shape, cfg.sigma_beta2_rate)
    lp += beta_logpdf(rho, cfg.rho_a, cfg.rho_b)
    lp += mvn_logpdf(eta, cfg.eta_mean, cfg.eta_cov)
    lp += inv_gamma_logpdf(sigma_gamma2, cfg.sigma_gamma2_shape, cfg.sigma_gamma2_rate)
    spec = gp_mod.GpSpec(X, mu, sigma_beta2, rho)
    lp += gp_mod.gp_log_density(beta_tilde, spec)
    return float(lp)


def _format_matrix(m: np.ndarray) -> str:
    return ";".join(",".join(repr(float(v)) for v in row) for row in np.atleast_2d(m))


def _parse_matrix(s: str) -> np.ndarray:
    return np.array([[float(v) for v in row.split(",")] for row in s.split(";")])


_SCALAR_KEYS = (
    "i_u0_ratio_shape",
    "i_u0_ratio_rate",
    "sigma_beta2_shape",
    "sigma_beta2_rate",
    "rho_a",
    "rho_b",
    "alpha_inv_shape",
    "alpha_inv_rate",
    "sigma_gamma2_shape",
    "sigma_gamma2_rate",
)


def save_prior_config(cfg: PriorConfig, path) -> None:
    """Write the configuration as key = value lines.

    Vectors are comma-separated; matrices use `;` between rows.
    """
    lines = [f"{k} = {getattr(cfg, k)!r}" for k in _SCALAR_KEYS]
    lines.append(f"mu_mean = {','.join(repr(float(v)) for v in cfg.mu_mean)}")
    lines.append(f"mu_cov = {_format_matrix(cfg.mu_cov)}")
    lines.append(f"eta_mean = {','.join(repr(float(v)) for v in cfg.eta_mean)}")
    lines.append(f"eta_cov = {_format_matrix(cfg.eta_cov)}")
    lines.append(f"link = {cfg.link.value}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_prior_config(path) -> PriorConfig:
    """Read a key = value configuration file written by save_prior_config.

    Unknown keys raise; missing keys fall back to the defaults.
    """
    kwargs = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key in _SCALAR_KEYS:
                kwargs[key] = float(value)
            elif key in ("mu_mean", "eta_mean"):
                kwargs[key] = np.array([float(v) for v in value.split(",")])
            elif key in ("mu_cov", "eta_cov"):
                kwargs[key] = _parse_matrix(value)
            elif key == "link":
                kwargs[key] = LinkFunction.from_name(value)
            else:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    return PriorConfig(**kwargs)
