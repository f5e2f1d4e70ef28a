"""Bayesian inference for epidemic transmission dynamics from daily
confirmed-case counts: a state-space compartmental model with undocumented
infections, a Gaussian-process prior on the time-varying transmission rate,
a parallel-tempering sampler, forecasting, and fit/convergence diagnostics.
"""

__version__ = "0.1.0"

from .dataio import (  # noqa: F401
    RawCaseSeries,
    ScenarioSpec,
    binomial_chain,
    generate_scenario,
    identifiability_counterexample,
    ingest_cases,
    load_dataset,
    read_cases_csv,
    save_dataset,
    scenario_beta,
    stochastic_generate,
)
from .diagnostics import (  # noqa: F401
    ChiSqFitResult,
    GewekeResult,
    bayesian_chi2,
    bayesian_chi2_null,
    geweke_z,
)
from .forecasting import ForecastDraws, forecast, train_test_split  # noqa: F401
from .gp import GpConditional, GpSpec, gp_conditional, gp_log_density, gp_sample_conditional  # noqa: F401
from .model import (  # noqa: F401
    CompartmentState,
    EpidemicParams,
    InfeasibleTrajectory,
    LinkFunction,
    Observations,
    Population,
    Trajectory,
    link_forward,
    link_inverse,
    log_likelihood,
    propagate,
    reproduction_numbers,
)
from .priors import PriorConfig, default_prior_config, log_prior, sensitivity_presets  # noqa: F401
from .sampler import (  # noqa: F401
    ParameterState,
    PosteriorDraws,
    SamplerConfig,
    TemperatureLadder,
    gibbs_sweep,
    pt_swap,
    run_sampler,
    tempered_log_target,
)
